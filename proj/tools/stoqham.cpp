// Command-line front end: compiles layered verification circuits into the
// clock-register, grid or line Hamiltonians, verifies their defining
// properties, and estimates ground energies.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage or input error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stoqham/grid2d.hpp"
#include "stoqham/kitaev.hpp"
#include "stoqham/line1d.hpp"
#include "stoqham/matrix_market.hpp"
#include "stoqham/spectral.hpp"

using namespace stoqham;
using nlohmann::json;

namespace {

struct RunManifest {
    std::string circuit_path;
    std::string construction = "grid2d";
    double delta = 1.0;
    std::string mode = "full";
    index_t cap = 10000000;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

LayeredCircuit load_or_die(const RunManifest& m) {
    try {
        return load_circuit(m.circuit_path);
    } catch (const CircuitParseError& e) {
        std::cerr << "circuit error: " << m.circuit_path << ": " << e.what() << "\n";
        std::exit(2);
    } catch (const std::exception& e) {
        std::cerr << "circuit error: " << e.what() << "\n";
        std::exit(2);
    }
}

std::vector<int> zero_witness(const LayeredCircuit& c) {
    return std::vector<int>(c.wires_with_role(WireRole::Witness).size(), 0);
}

struct NamedTerms {
    std::vector<std::pair<std::string, std::vector<LocalTerm>>> terms;
    std::vector<std::pair<std::string, double>> weights;
    BasisDescriptor basis;
    int T = 0;  // steps for the grid, trace length for the line
    json geometry;
};

NamedTerms build_geometric(const LayeredCircuit& c, const RunManifest& m) {
    NamedTerms out;
    if (m.construction == "grid2d") {
        auto b = build_full_2d(c, {}, m.delta);
        out.basis = b.basis;
        out.T = b.T;
        out.terms = {{"init", b.init}, {"prop", b.prop}, {"penalty", b.penalty}, {"final", b.fin}};
        out.weights = {{"init", 1.0}, {"prop", b.prop_weight}, {"penalty", 1.0}, {"final", b.final_weight}};
        out.geometry = {{"site_dim", kSiteDim2D},
                        {"grid_rows", b.geom.rows},
                        {"grid_cols", b.geom.cols},
                        {"snapshots", b.T + 1}};
    } else if (m.construction == "line1d") {
        auto b = build_full_1d(c, {}, m.delta);
        out.basis = b.basis;
        out.T = b.T;
        out.terms = {{"init", b.init}, {"prop", b.prop}, {"penalty", b.penalty}, {"final", b.fin}};
        out.weights = {{"init", 1.0}, {"prop", b.prop_weight}, {"penalty", 1.0}, {"final", b.final_weight}};
        out.geometry = {{"site_dim", kSiteDim1D},
                        {"chain_sites", b.geom.sites()},
                        {"block_len", b.geom.block_len()},
                        {"trace_length", b.T}};
    } else {
        std::cerr << "error: unknown construction '" << m.construction << "'\n";
        std::exit(2);
    }
    return out;
}

index_t full_dim(const LayeredCircuit& c, const RunManifest& m) {
    if (m.construction == "kitaev") {
        return (INT64_C(1) << c.n_prime) * (c.gate_count() + 1);
    }
    const int sites = m.construction == "grid2d" ? grid_geometry(c).site_count()
                                                 : ChainGeom{c.n_prime, c.rounds()}.sites();
    return checked_pow(m.construction == "grid2d" ? kSiteDim2D : kSiteDim1D, sites);
}

void enforce_cap(const LayeredCircuit& c, const RunManifest& m) {
    const index_t dim = full_dim(c, m);
    if (dim < 0 || dim > m.cap) {
        std::cerr << "error: full basis size " << (dim < 0 ? std::string("> 2^62") : std::to_string(dim))
                  << " exceeds the cap " << m.cap << "; use --mode restricted or raise --cap\n";
        std::exit(2);
    }
}

SparseOperator assemble_weighted_sum(const NamedTerms& nt) {
    std::vector<LocalTerm> all;
    for (std::size_t i = 0; i < nt.terms.size(); ++i) {
        const double w = nt.weights[i].second;
        for (LocalTerm lt : nt.terms[i].second) {
            for (auto& v : lt.mat) {
                v *= w;
            }
            all.push_back(std::move(lt));
        }
    }
    return assemble(all, nt.basis);
}

// -----------------------------------------------------------------------
// compile
// -----------------------------------------------------------------------

int cmd_compile(const RunManifest& m, bool write_traces) {
    const LayeredCircuit c = load_or_die(m);
    std::filesystem::create_directories(m.out_dir);
    json summary;
    summary["construction"] = m.construction;
    summary["circuit"] = m.circuit_path;
    summary["n_prime"] = c.n_prime;
    summary["rounds"] = c.rounds();
    summary["delta"] = m.delta;
    std::vector<std::string> files;

    if (m.construction == "kitaev") {
        enforce_cap(c, m);
        const auto b = build_kitaev(c);
        summary["T"] = b.T;
        summary["dim"] = b.dim();
        const std::vector<std::pair<std::string, const SparseOperator*>> named = {
            {"in", &b.h_in}, {"prop", &b.h_prop}, {"out", &b.h_out}};
        for (const auto& [name, op] : named) {
            const std::string path = m.out_dir + "/kitaev_" + name + ".mtx";
            write_matrix_market(*op, path);
            files.push_back(path);
            summary["terms"][name] = {{"nnz", op->triples().size()},
                                      {"stoquastic", check_stoquastic_term(*op, name).pass}};
        }
    } else {
        const NamedTerms nt = build_geometric(c, m);
        summary["T"] = nt.T;
        summary["geometry"] = nt.geometry;
        summary["dim"] = nt.basis.dim();
        enforce_cap(c, m);
        for (const auto& [name, terms] : nt.terms) {
            const auto op = assemble(terms, nt.basis);
            const std::string path = m.out_dir + "/" + m.construction + "_" + name + ".mtx";
            write_matrix_market(op, path);
            files.push_back(path);
            summary["terms"][name] = {{"nnz", op.triples().size()},
                                      {"local_blocks", terms.size()},
                                      {"stoquastic", check_stoquastic_term(op, name).pass}};
        }
        if (write_traces) {
            const std::string path = m.out_dir + "/" + m.construction + "_trace.txt";
            std::ofstream out(path);
            if (m.construction == "grid2d") {
                for (const auto& s : legal_shapes(c.n_prime, c.rounds())) {
                    out << shape_to_string(s) << "\n";
                }
            } else {
                for (const auto& cfg : full_trace_1d(c, std::vector<int>(c.n_prime, 0))) {
                    out << chain_to_string(cfg) << "\n";
                }
            }
            files.push_back(path);
        }
    }
    summary["files"] = files;
    const std::string spath = m.out_dir + "/" + m.construction + "_summary.json";
    std::ofstream(spath) << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// -----------------------------------------------------------------------
// verify
// -----------------------------------------------------------------------

int cmd_verify(const RunManifest& m, bool fig5, const std::string& stoq_file) {
    bool pass = true;
    auto report = [&](const std::string& what, bool ok, const std::string& detail = "") {
        std::cout << (ok ? "PASS " : "FAIL ") << what;
        if (!detail.empty()) {
            std::cout << "  (" << detail << ")";
        }
        std::cout << "\n";
        pass = pass && ok;
    };

    if (!stoq_file.empty()) {
        try {
            const auto op = read_matrix_market(stoq_file);
            const auto v = check_stoquastic_term(op, stoq_file);
            report("stoquasticity of " + stoq_file, v.pass,
                   v.pass ? "worst off-diagonal " + std::to_string(v.worst_offdiag)
                          : "positive off-diagonal " + std::to_string(v.worst_offdiag) + " at (" +
                                std::to_string(v.worst_row) + "," + std::to_string(v.worst_col) + ")");
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        return pass ? 0 : 1;
    }

    if (fig5) {
        const auto cycle = run_cycle(4);
        const auto expected = reference_cycle_trace_4();
        bool ok = cycle.size() == expected.size();
        for (std::size_t i = 0; i < cycle.size(); ++i) {
            const std::string got = chain_to_string(cycle[i]);
            const bool row_ok = ok && got == expected[i];
            std::cout << (row_ok ? "  " : "! ") << got;
            if (!row_ok && i < expected.size()) {
                std::cout << "   expected: " << expected[i];
            }
            std::cout << "\n";
            ok = ok && row_ok;
        }
        report("reference cycle reproduction (22 rows)", ok);
        return pass ? 0 : 1;
    }

    const LayeredCircuit c = load_or_die(m);
    const auto witness = zero_witness(c);
    const auto accept = acceptance_probability(c, witness, 20, m.seed);

    if (m.construction == "kitaev") {
        enforce_cap(c, m);
        const auto b = build_kitaev(c);
        const auto rep = check_stoquastic({{"in", &b.h_in}, {"prop", &b.h_prop}, {"out", &b.h_out}});
        for (const auto& t : rep.terms) {
            report("stoquasticity of " + t.name, t.pass,
                   "worst off-diagonal " + std::to_string(t.worst_offdiag));
        }
        const auto phi = history_state(c, kitaev_initial_state(c, witness));
        report("history-state energy of the input term",
               std::abs(expectation(b.h_in, phi)) <= 1e-10);
        report("history-state energy of the propagation term",
               std::abs(expectation(b.h_prop, phi)) <= 1e-10);
        const double want = (1.0 - accept.p_accept) / static_cast<double>(b.T + 1);
        const double got = expectation(b.h_out, phi);
        report("history-state energy of the output term matches the acceptance oracle",
               std::abs(got - want) <= 1e-10,
               "got " + std::to_string(got) + ", oracle " + std::to_string(want));
        return pass ? 0 : 1;
    }

    const NamedTerms nt = build_geometric(c, m);
    for (const auto& [name, terms] : nt.terms) {
        const auto v = check_stoquastic_local(terms, name);
        report("stoquasticity of " + name + " (term-wise blocks)", v.pass,
               "worst off-diagonal " + std::to_string(v.worst_offdiag));
    }

    if (m.construction == "grid2d") {
        const auto rules = penalty_rules();
        const auto shapes = legal_shapes(c.n_prime, c.rounds());
        bool zero = true;
        for (const auto& s : shapes) {
            zero = zero && penalty_energy(s, rules) == 0;
        }
        report("legal shapes carry zero penalty", zero,
               std::to_string(shapes.size()) + " shapes");
        const auto phi = history_state_2d(c, kitaev_initial_state(c, witness));
        report("history-state energy of init", std::abs(expectation_local(nt.terms[0].second, nt.basis, phi)) <= 1e-10);
        report("history-state energy of prop", std::abs(expectation_local(nt.terms[1].second, nt.basis, phi)) <= 1e-10);
        report("history-state energy of penalty",
               std::abs(expectation_local(nt.terms[2].second, nt.basis, phi)) <= 1e-10);
        const double want =
            (c.n_prime - 1) * (1.0 - accept.p_accept) / static_cast<double>(nt.T + 1);
        const double got = expectation_local(nt.terms[3].second, nt.basis, phi);
        report("history-state energy of final matches the acceptance oracle",
               std::abs(got - want) <= 1e-10,
               "got " + std::to_string(got) + ", oracle " + std::to_string(want));
    } else {
        const auto trace = full_trace_1d(c, std::vector<int>(c.n_prime, 0));
        bool zero = true, legal = true;
        for (const auto& cfg : trace) {
            zero = zero && penalty_energy_1d(cfg) == 0;
            legal = legal && classify_illegal(cfg) == IllegalKind::Legal;
        }
        report("trace configurations carry zero penalty", zero,
               std::to_string(trace.size()) + " configurations");
        report("trace configurations classify as legal", legal);
        const int expected_len = trace_length_formula_1d(c.n_prime, c.rounds());
        report("trace length matches the closed formula",
               static_cast<int>(trace.size()) == expected_len,
               "got " + std::to_string(trace.size()) + ", formula " + std::to_string(expected_len));
        const auto cycle = run_cycle(c.n_prime);
        report("cycle has (n'-1)(2n'-1) transitions",
               cycle.size() == static_cast<std::size_t>((c.n_prime - 1) * (2 * c.n_prime - 1) + 1));
        const auto phi = history_state_1d(c, kitaev_initial_state(c, witness));
        report("history-state energy of init", std::abs(expectation_local(nt.terms[0].second, nt.basis, phi)) <= 1e-10);
        report("history-state energy of prop", std::abs(expectation_local(nt.terms[1].second, nt.basis, phi)) <= 1e-10);
        report("history-state energy of penalty",
               std::abs(expectation_local(nt.terms[2].second, nt.basis, phi)) <= 1e-10);
        const double want = (1.0 - accept.p_accept) / static_cast<double>(nt.T);
        const double got = expectation_local(nt.terms[3].second, nt.basis, phi);
        report("history-state energy of final matches the acceptance oracle",
               std::abs(got - want) <= 1e-10,
               "got " + std::to_string(got) + ", oracle " + std::to_string(want));
    }
    return pass ? 0 : 1;
}

// -----------------------------------------------------------------------
// spectrum
// -----------------------------------------------------------------------

int cmd_spectrum(const RunManifest& m) {
    const LayeredCircuit c = load_or_die(m);
    json out;
    out["construction"] = m.construction;
    out["mode"] = m.mode;
    out["delta"] = m.delta;
    const double t0 = now_s();

    if (m.construction == "kitaev") {
        enforce_cap(c, m);
        const auto b = build_kitaev(c);
        SparseOperator h(b.dim());
        h += b.h_in;
        h += b.h_prop;
        h += b.h_out;
        h.canonicalize();
        const auto r = min_eigenvalue(h);
        out["T"] = b.T;
        out["dim"] = b.dim();
        out["lambda_min"] = r.lambda_min;
        if (r.lambda_second) {
            out["lambda_second"] = *r.lambda_second;
        }
        out["method"] = r.method;
    } else {
        const NamedTerms nt = build_geometric(c, m);
        out["T"] = nt.T;
        const double t_cubed = std::pow(static_cast<double>(nt.T), 3.0);
        if (m.mode == "restricted") {
            const auto sector = m.construction == "grid2d" ? trace_sector_basis_2d(c)
                                                           : trace_sector_basis_1d(c);
            out["sector_dim"] = sector.size();
            std::vector<LocalTerm> a1_terms;
            std::vector<LocalTerm> a2_terms;
            SparseOperator restricted(static_cast<index_t>(sector.size()));
            for (std::size_t i = 0; i < nt.terms.size(); ++i) {
                const auto r = restrict_local(nt.terms[i].second, nt.basis, sector, nt.weights[i].second);
                restricted += r;
                if (nt.terms[i].first == "init" || nt.terms[i].first == "final") {
                    for (const auto& lt : nt.terms[i].second) {
                        a1_terms.push_back(lt);
                    }
                } else if (nt.terms[i].first == "prop") {
                    a2_terms = nt.terms[i].second;
                }
            }
            restricted.canonicalize();
            const auto r = min_eigenvalue(restricted);
            out["lambda_min"] = r.lambda_min;
            if (r.lambda_second) {
                out["lambda_second"] = *r.lambda_second;
            }
            out["method"] = "restricted+" + r.method;
            out["c_times_T3"] = r.lambda_min * t_cubed;
            try {
                const double pw = m.construction == "grid2d" ? 0.5 : 1.0;
                const auto a1 = restrict_local(a1_terms, nt.basis, sector);
                const auto a2 = restrict_local(a2_terms, nt.basis, sector, pw);
                const auto gb = geometric_bound(a1, a2);
                out["geometric_bound"] = gb.bound;
                out["bound_lambda"] = gb.lambda;
                out["bound_sin2_half_theta"] = gb.sin2_half_theta;
                out["bound_holds"] = gb.lambda_min_sum >= gb.bound - 1e-9;
            } catch (const std::exception& e) {
                out["geometric_bound_error"] = e.what();
            }
        } else {
            enforce_cap(c, m);
            const auto h = assemble_weighted_sum(nt);
            out["dim"] = h.dim();
            const auto r = min_eigenvalue(h);
            out["lambda_min"] = r.lambda_min;
            if (r.lambda_second) {
                out["lambda_second"] = *r.lambda_second;
            }
            out["method"] = r.method;
            out["matvecs"] = r.matvecs;
            out["residual"] = r.residual;
            out["c_times_T3"] = r.lambda_min * t_cubed;
            if (h.dim() <= 10000) {
                const auto it = min_eigenvalue(h, EigMode::Iterative);
                out["lambda_min_iterative"] = it.lambda_min;
                out["routes_agree"] =
                    std::abs(it.lambda_min - r.lambda_min) <= 1e-8 * std::max(1.0, h.norm_bound());
            }
        }
    }
    out["runtime_s"] = now_s() - t0;
    std::cout << out.dump(2) << "\n";
    if (!m.out_dir.empty()) {
        std::filesystem::create_directories(m.out_dir);
        std::ofstream(m.out_dir + "/" + m.construction + "_spectrum.json") << out.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stoqham: layered reversible circuits to stoquastic lattice Hamiltonians"};
    app.require_subcommand(1);

    RunManifest m;
    bool fig5 = false;
    bool traces = false;
    std::string stoq_file;

    auto add_common = [&](CLI::App* cmd, bool need_circuit) {
        cmd->add_option("--construction", m.construction, "kitaev | grid2d | line1d")
            ->check(CLI::IsMember({"kitaev", "grid2d", "line1d"}));
        auto* opt = cmd->add_option("--circuit", m.circuit_path, "circuit file");
        if (need_circuit) {
            opt->required();
        }
        cmd->add_option("--delta", m.delta, "weight of the final term");
        cmd->add_option("--mode", m.mode, "full | restricted")->check(CLI::IsMember({"full", "restricted"}));
        cmd->add_option("--cap", m.cap, "largest full basis size assembled");
        cmd->add_option("--seed", m.seed, "seed for sampled acceptance estimates");
        cmd->add_option("--out", m.out_dir, "output directory");
    };

    auto* compile = app.add_subcommand("compile", "write operator files and a summary");
    add_common(compile, true);
    compile->add_flag("--traces", traces, "also write the shape or chain trace");

    auto* verify = app.add_subcommand("verify", "check the construction's defining properties");
    add_common(verify, false);
    verify->add_flag("--fig5", fig5, "print the reference 22-row cycle and diff it");
    verify->add_option("--stoq", stoq_file, "check stoquasticity of an operator file");

    auto* spectrum = app.add_subcommand("spectrum", "ground-energy estimates and bounds");
    add_common(spectrum, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (compile->parsed()) {
            return cmd_compile(m, traces);
        }
        if (verify->parsed()) {
            if (!fig5 && stoq_file.empty() && m.circuit_path.empty()) {
                std::cerr << "error: verify needs --circuit, --fig5 or --stoq\n";
                return 2;
            }
            return cmd_verify(m, fig5, stoq_file);
        }
        if (spectrum->parsed()) {
            return cmd_spectrum(m);
        }
    } catch (const NonConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
