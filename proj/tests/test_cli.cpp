#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace {

const std::string kCli = STOQHAM_CLI_PATH;
const std::string kCircuits = STOQHAM_CIRCUITS_DIR;

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    const std::string out_path = "cli_test_stdout.txt";
    const std::string cmd = kCli + " " + args + " > " + out_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WEXITSTATUS(status);
    std::ifstream in(out_path);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    std::remove(out_path.c_str());
    return r;
}

json tail_json(const std::string& text) {
    const auto pos = text.find('{');
    REQUIRE(pos != std::string::npos);
    return json::parse(text.substr(pos));
}

}  // namespace

TEST_CASE("compile writes four operator files and the pinned dimensions") {
    std::filesystem::remove_all("cli_out_1d");
    auto r = run("compile --construction line1d --circuit " + kCircuits +
                 "/accept_1d_n4.qc --out cli_out_1d");
    REQUIRE(r.code == 0);
    const json s = tail_json(r.out);
    CHECK(s["dim"] == 6859);
    CHECK(s["geometry"]["site_dim"] == 19);
    int mtx = 0;
    for (const auto& f : s["files"]) {
        if (f.get<std::string>().ends_with(".mtx")) {
            ++mtx;
            CHECK(std::filesystem::exists(f.get<std::string>()));
        }
    }
    CHECK(mtx == 4);
    CHECK(std::filesystem::exists("cli_out_1d/line1d_summary.json"));

    auto g = run("compile --construction grid2d --circuit " + kCircuits +
                 "/reject_n2.qc --out cli_out_2d");
    REQUIRE(g.code == 0);
    const json s2 = tail_json(g.out);
    CHECK(s2["geometry"]["site_dim"] == 14);
    CHECK(s2["geometry"]["grid_rows"] == 1);
    CHECK(s2["geometry"]["grid_cols"] == 3);
    std::filesystem::remove_all("cli_out_1d");
    std::filesystem::remove_all("cli_out_2d");
}

TEST_CASE("invalid gate lines exit with code 2 and a line number") {
    std::ofstream("cli_bad.qc") << "QUBITS 2\nROLE 0 output\nROLE 1 ancilla\nTOF 0 1\n";
    auto r = run("compile --construction grid2d --circuit cli_bad.qc");
    CHECK(r.code == 2);
    CHECK(r.out.find("line 4") != std::string::npos);
    std::remove("cli_bad.qc");
}

TEST_CASE("verify passes on the shipped toys") {
    for (const std::string args :
         {"verify --construction grid2d --circuit " + kCircuits + "/accept_n2.qc",
          "verify --construction grid2d --circuit " + kCircuits + "/coin_copy_2d_n4.qc",
          "verify --construction line1d --circuit " + kCircuits + "/coin_copy_1d_n4.qc",
          "verify --construction kitaev --circuit " + kCircuits + "/accept_2d_n4.qc"}) {
        auto r = run(args);
        CHECK(r.code == 0);
        CHECK(r.out.find("FAIL") == std::string::npos);
    }
}

TEST_CASE("verify --fig5 prints the 22-row cycle") {
    auto r = run("verify --fig5");
    CHECK(r.code == 0);
    CHECK(r.out.find("D D D | CC qR qR") != std::string::npos);
    CHECK(r.out.find("PASS reference cycle reproduction") != std::string::npos);
}

TEST_CASE("verify flags a corrupted operator with its location") {
    // A genuine term passes; the same file with one entry flipped positive
    // fails with the location reported.
    std::filesystem::remove_all("cli_corrupt");
    auto c = run("compile --construction line1d --circuit " + kCircuits +
                 "/accept_1d_n4.qc --out cli_corrupt");
    REQUIRE(c.code == 0);
    auto good = run("verify --stoq cli_corrupt/line1d_prop.mtx");
    CHECK(good.code == 0);
    {
        std::ifstream in("cli_corrupt/line1d_prop.mtx");
        std::stringstream buf;
        buf << in.rdbuf();
        std::string text = buf.str();
        const auto pos = text.find("-0.5");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 4, "+0.5");
        std::ofstream("cli_corrupt/line1d_prop.mtx") << text;
    }
    auto bad = run("verify --stoq cli_corrupt/line1d_prop.mtx");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL") != std::string::npos);
    CHECK(bad.out.find("positive off-diagonal") != std::string::npos);
    std::filesystem::remove_all("cli_corrupt");
}

TEST_CASE("spectrum reports the ground energy and the certified bound") {
    auto r = run("spectrum --construction grid2d --circuit " + kCircuits +
                 "/reject_n2.qc --out cli_sp");
    REQUIRE(r.code == 0);
    const json s = tail_json(r.out);
    CHECK(s["lambda_min"].get<double>() > 1e-6);
    CHECK(s["routes_agree"] == true);
    CHECK(s["c_times_T3"].get<double>() > 0.01);

    auto rr = run("spectrum --construction grid2d --circuit " + kCircuits +
                  "/reject_2d_n4.qc --mode restricted --out cli_sp");
    REQUIRE(rr.code == 0);
    const json s2 = tail_json(rr.out);
    CHECK(s2["lambda_min"].get<double>() > 0.0);
    CHECK(s2["geometric_bound"].get<double>() > 0.0);
    CHECK(s2["bound_holds"] == true);
    CHECK(s2["lambda_min"].get<double>() >= s2["geometric_bound"].get<double>() - 1e-9);
    std::filesystem::remove_all("cli_sp");
}

TEST_CASE("the size cap rejects oversized assemblies with exit 2") {
    auto r = run("compile --construction grid2d --circuit " + kCircuits +
                 "/accept_2d_n4_r2.qc --out cli_cap");
    CHECK(r.code == 2);  // 14^10 exceeds the default cap
    auto r2 = run("spectrum --construction grid2d --circuit " + kCircuits +
                  "/accept_2d_n4.qc --cap 1000");
    CHECK(r2.code == 2);
    std::filesystem::remove_all("cli_cap");
}
