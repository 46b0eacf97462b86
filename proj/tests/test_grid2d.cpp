#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "stoqham/grid2d.hpp"
#include "stoqham/kitaev.hpp"
#include "stoqham/spectral.hpp"

using namespace stoqham;

namespace {

LayeredCircuit accept_n2() {
    return normalize({Gate::x(1)}, {WireRole::Output, WireRole::Ancilla});
}

LayeredCircuit reject_n2() {
    return normalize({}, {WireRole::Output, WireRole::Ancilla});
}

LayeredCircuit coin_copy_n4() {
    // Output (wire 1) = coin AND constant-one; grid-friendly: output on the top site.
    return normalize({Gate::toffoli(3, 2, 1)},
                     {WireRole::Output, WireRole::Input1, WireRole::Coin, WireRole::Witness});
}

LayeredCircuit accept_n4() {
    return normalize({Gate::toffoli(3, 2, 1)},
                     {WireRole::Output, WireRole::Input1, WireRole::Input1, WireRole::Ancilla});
}

LayeredCircuit reject_n4() {
    return normalize({}, {WireRole::Output, WireRole::Ancilla, WireRole::Ancilla, WireRole::Witness});
}

std::vector<double> plus_coin_phi0(const LayeredCircuit& c, const std::vector<int>& witness) {
    return kitaev_initial_state(c, witness);
}

SparseVec history(const LayeredCircuit& c, const std::vector<int>& witness) {
    return history_state_2d(c, plus_coin_phi0(c, witness));
}

/// Trace-sector basis: encoded snapshots over every witness/coin assignment.
std::vector<index_t> trace_sector(const LayeredCircuit& c) {
    const auto steps = build_steps_2d(c);
    const BasisDescriptor basis = grid_geometry(c).basis();
    std::vector<int> free_wires;
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Witness || c.roles[w - 1] == WireRole::Coin) {
            free_wires.push_back(w);
        }
    }
    std::vector<index_t> out;
    for (std::uint64_t a = 0; a < (UINT64_C(1) << free_wires.size()); ++a) {
        std::vector<int> bits(c.n_prime, 0);
        for (int w = 1; w <= c.n_prime; ++w) {
            if (c.roles[w - 1] == WireRole::Input1) {
                bits[w - 1] = 1;
            }
        }
        for (std::size_t i = 0; i < free_wires.size(); ++i) {
            bits[free_wires[i] - 1] = static_cast<int>((a >> i) & 1);
        }
        for (const auto& snap : trace_2d(c, bits, steps)) {
            out.push_back(encode_snapshot_2d(snap, basis));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

TEST_CASE("site basis has 14 states in the declared order") {
    const auto b = site_basis_2d();
    REQUIRE(b.size() == 14);
    CHECK(b[0].tag == Tag2D::Unborn);
    CHECK(b[1].tag == Tag2D::Dead);
    CHECK(b[2].tag == Tag2D::BB);
    CHECK(b[2].payload == 0);
    CHECK(b[3].payload == 1);  // BB block starts at index 2
    CHECK(b[6].tag == Tag2D::CB);
    CHECK(b[10].tag == Tag2D::CC);
    for (int i = 0; i < 14; ++i) {
        CHECK(site_index_2d(b[i].tag, std::max(0, b[i].payload)) == i);
    }
}

TEST_CASE("legal shapes enumerate the two templates in time order") {
    for (auto [n, R] : std::vector<std::pair<int, int>>{{2, 1}, {2, 2}, {4, 1}, {4, 2}, {6, 1}}) {
        const auto shapes = legal_shapes(n, R);
        const int W = 2 * R + 1, L = n / 2;
        CHECK(static_cast<int>(shapes.size()) == W * (n + 1) + (W - 1) * (L - 1));
        CHECK(static_cast<int>(shapes.size()) == steps_2d(n, R) + 1);
        // Initial: first column fresh data, everything else unborn.
        const auto& first = shapes.front();
        for (int r = 1; r <= L; ++r) {
            CHECK(first.at(r, 1) == Tag2D::BB);
            for (int c = 2; c <= W; ++c) {
                CHECK(first.at(r, c) == Tag2D::Unborn);
            }
        }
        // Final: all dead except the last column fully finished.
        const auto& last = shapes.back();
        for (int r = 1; r <= L; ++r) {
            CHECK(last.at(r, W) == Tag2D::CC);
            for (int c = 1; c < W; ++c) {
                CHECK(last.at(r, c) == Tag2D::Dead);
            }
        }
        // Distinct, and every one matches the independent template oracle.
        std::set<std::vector<Tag2D>> seen;
        for (const auto& s : shapes) {
            CHECK(oracles::is_template_shape(s));
            seen.insert(s.tags);
        }
        CHECK(seen.size() == shapes.size());
    }
}

TEST_CASE("penalty separates template shapes exactly (exhaustive 2x3 grid)") {
    const int n = 4, R = 1;
    const auto rules = penalty_rules();
    const auto shapes = legal_shapes(n, R);
    std::set<std::vector<Tag2D>> legal;
    for (const auto& s : shapes) {
        legal.insert(s.tags);
    }
    GridShape s{2, 3, std::vector<Tag2D>(6)};
    int checked = 0;
    for (int code = 0; code < 5 * 5 * 5 * 5 * 5 * 5; ++code) {
        int rem = code;
        for (auto& t : s.tags) {
            t = static_cast<Tag2D>(rem % 5);
            rem /= 5;
        }
        const int pen = penalty_energy(s, rules);
        const bool in_templates = oracles::is_template_shape(s);
        CHECK(in_templates == (legal.count(s.tags) > 0));
        if (in_templates) {
            CHECK(pen == 0);
        } else {
            CHECK(pen >= 1);
        }
        ++checked;
    }
    CHECK(checked == 15625);
}

TEST_CASE("spot penalties from the forbidden tables") {
    const auto rules = penalty_rules();
    // Unborn directly left of dead in the same row.
    GridShape s{2, 3, std::vector<Tag2D>(6, Tag2D::Unborn)};
    s.at(1, 2) = Tag2D::Dead;
    CHECK(penalty_energy(s, rules) >= 1);
    // Half-touched above finished within a column.
    GridShape v{2, 3, std::vector<Tag2D>(6, Tag2D::Unborn)};
    v.at(1, 1) = Tag2D::CB;
    v.at(2, 1) = Tag2D::CC;
    CHECK(penalty_energy(v, rules) >= 1);
}

TEST_CASE("penalty operator is diagonal with integer entries") {
    const auto c = reject_n2();
    const auto g = grid_geometry(c);
    const auto op = assemble(build_penalty_local(g), g.basis());
    for (const auto& t : op.triples()) {
        CHECK(t.row == t.col);
        CHECK(t.value >= 1.0);
        CHECK(t.value == static_cast<double>(static_cast<long long>(t.value)));
    }
    // Encoded legal snapshots carry zero penalty for every payload.
    const auto steps = build_steps_2d(c);
    const auto basis = g.basis();
    std::vector<double> diag(basis.dim(), 0.0);
    for (const auto& t : op.triples()) {
        diag[t.row] = t.value;
    }
    for (int x = 0; x < 4; ++x) {
        for (const auto& snap : trace_2d(c, {x & 1, x >> 1}, steps)) {
            CHECK(diag[encode_snapshot_2d(snap, basis)] == 0.0);
        }
    }
}

TEST_CASE("step anchors identify exactly one legal shape each") {
    for (const auto& c : {reject_n2(), coin_copy_n4()}) {
        const auto shapes = legal_shapes(c.n_prime, c.rounds());
        const auto steps = build_steps_2d(c);
        REQUIRE(steps.size() + 1 == shapes.size());
        auto matches = [&](const TagPattern2D& pat, const GridShape& s) {
            for (const auto& [site, tag] : pat.req) {
                if (s.tags[site] != tag) {
                    return false;
                }
            }
            return true;
        };
        for (std::size_t t = 0; t < steps.size(); ++t) {
            int before_hits = 0, after_hits = 0;
            for (std::size_t u = 0; u < shapes.size(); ++u) {
                if (matches(steps[t].before_id, shapes[u])) {
                    ++before_hits;
                    CHECK(u == t);
                }
                if (matches(steps[t].after_id, shapes[u])) {
                    ++after_hits;
                    CHECK(u == t + 1);
                }
            }
            CHECK(before_hits == 1);
            CHECK(after_hits == 1);
        }
    }
}

TEST_CASE("propagation blocks are stoquastic with half-entries") {
    for (const auto& c : {reject_n2(), coin_copy_n4(), accept_n4()}) {
        const auto terms = build_prop_local(c);
        CHECK(check_stoquastic_local(terms, "prop").pass);
        for (const auto& lt : terms) {
            const int ld = lt.local_dim();
            for (int r = 0; r < ld; ++r) {
                for (int col = 0; col < ld; ++col) {
                    if (r != col) {
                        const double v = lt.at(r, col);
                        CHECK((v == 0.0 || v == -0.5));
                    }
                }
            }
        }
    }
}

TEST_CASE("trace payloads track the circuit simulation") {
    const auto c = coin_copy_n4();
    const auto steps = build_steps_2d(c);
    const GridGeom g = grid_geometry(c);
    for (std::uint64_t x = 0; x < 16; ++x) {
        std::vector<int> bits(4);
        for (int i = 0; i < 4; ++i) {
            bits[i] = static_cast<int>((x >> i) & 1);
        }
        const auto trace = trace_2d(c, bits, steps);
        // Final snapshot holds the full simulation output in the last column.
        const auto out = simulate(c, bits);
        const auto& fin = trace.back();
        for (int i = 1; i <= g.rows; ++i) {
            const auto& st = fin[g.site(i, g.cols)];
            CHECK(st.tag == Tag2D::CC);
            CHECK(st.payload == ((out[2 * i - 2] << 1) | out[2 * i - 1]));
        }
        // Every fresh-data column start matches the prefix simulation.
        int t = 0;
        for (int col = 1; col <= g.cols; ++col) {
            // Shape index of the column's gate-phase start.
            if (col > 1) {
                t += g.rows;  // crossing steps
            }
            std::vector<int> prefix = bits;
            LayeredCircuit partial = c;
            partial.layers.assign(c.layers.begin(), c.layers.begin() + std::min<std::size_t>((col - 1) / 2, c.layers.size()));
            if (partial.layers.empty()) {
                partial.layers.push_back(ComputationalLayer::identities(c.n_prime));
                prefix = bits;
            } else {
                prefix = simulate(partial, bits);
            }
            const auto& snap = trace[t];
            for (int i = 1; i <= g.rows; ++i) {
                CHECK(snap[g.site(i, col)].tag == Tag2D::BB);
                CHECK(snap[g.site(i, col)].payload == ((prefix[2 * i - 2] << 1) | prefix[2 * i - 1]));
            }
            t += c.n_prime;  // gate steps of this column
        }
    }
}

TEST_CASE("restricted propagation is the exact random-walk matrix") {
    for (const auto& c : {reject_n2(), coin_copy_n4()}) {
        const auto steps = build_steps_2d(c);
        const auto prop = build_prop_local(c);
        const BasisDescriptor basis = grid_geometry(c).basis();
        std::vector<int> bits(c.n_prime, 0);
        const auto trace = trace_2d(c, bits, steps);
        const int T = static_cast<int>(steps.size());
        std::vector<index_t> enc;
        for (const auto& snap : trace) {
            enc.push_back(encode_snapshot_2d(snap, basis));
        }
        for (int a = 0; a <= T; ++a) {
            for (int b = 0; b <= T; ++b) {
                const double v = oracles::entry_of(prop, basis, enc[a], enc[b]);
                double want = 0.0;
                if (a == b) {
                    want = (a == 0 || a == T) ? 0.5 : 1.0;
                } else if (std::abs(a - b) == 1) {
                    want = -0.5;
                }
                CHECK(v == doctest::Approx(want).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("walk gap scales like 1/T^2") {
    // Dense second eigenvalue of the restricted walk for the identity circuit.
    const auto c = reject_n2();
    const auto prop = build_prop_local(c);
    const BasisDescriptor basis = grid_geometry(c).basis();
    const auto steps = build_steps_2d(c);
    const auto trace = trace_2d(c, {0, 0}, steps);
    std::vector<index_t> enc;
    for (const auto& snap : trace) {
        enc.push_back(encode_snapshot_2d(snap, basis));
    }
    std::vector<index_t> sorted = enc;
    std::sort(sorted.begin(), sorted.end());
    const auto walk = restrict_local(prop, basis, sorted);
    const auto ev = dense_eigenvalues(walk);
    const int T = static_cast<int>(steps.size());
    CHECK(std::abs(ev[0]) <= 1e-12);
    CHECK(ev[1] >= 0.5 / static_cast<double>(T * T));
}

TEST_CASE("initial term annihilates the history state and is stoquastic") {
    for (const auto& c : {accept_n2(), coin_copy_n4()}) {
        const auto init = build_init_local(c);
        CHECK(check_stoquastic_local(init, "init").pass);
        const BasisDescriptor basis = grid_geometry(c).basis();
        const auto phi = history(c, std::vector<int>(c.wires_with_role(WireRole::Witness).size(), 0));
        CHECK(std::abs(expectation_local(init, basis, phi)) <= 1e-12);
        // Coin defect carries the -1/2 off-diagonals.
        bool has_coin = !c.wires_with_role(WireRole::Coin).empty();
        if (has_coin) {
            bool found = false;
            for (const auto& lt : init) {
                for (int r = 0; r < lt.local_dim() && !found; ++r) {
                    for (int col = 0; col < lt.local_dim() && !found; ++col) {
                        found = r != col && lt.at(r, col) == -0.5;
                    }
                }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("wrong inputs are caught at the first snapshot") {
    const auto c = accept_n4();
    const auto init = build_init_local(c);  // checks the two constant-one wires
    const BasisDescriptor basis = grid_geometry(c).basis();
    const auto steps = build_steps_2d(c);
    // Run the trace with one constant wire flipped to zero.
    const auto trace = trace_2d(c, {0, 0, 1, 0}, steps);
    SparseVec phi;
    const double n = 1.0 / std::sqrt(static_cast<double>(trace.size()));
    for (const auto& snap : trace) {
        phi.push_back({encode_snapshot_2d(snap, basis), n});
    }
    sparsevec_canonicalize(phi);
    CHECK(expectation_local(init, basis, phi) > 0.0);
}

TEST_CASE("final-term energy matches the acceptance oracle") {
    // At n'=2 the finished state appears only in the final snapshot, so the
    // identity is exact with a single count.
    {
        const auto c = accept_n2();
        const auto fin = build_final_local(c);
        const BasisDescriptor basis = grid_geometry(c).basis();
        const auto phi = history(c, {});
        const int T = steps_2d(c.n_prime, c.rounds());
        CHECK(std::abs(expectation_local(fin, basis, phi)) <= 1e-12);
        const auto cr = reject_n2();
        const auto finr = build_final_local(cr);
        const auto phir = history(cr, {});
        CHECK(expectation_local(finr, basis, phir) ==
              doctest::Approx(1.0 / static_cast<double>(T + 1)).epsilon(1e-12));
    }
    // At larger n' the finished output site is read by the last n'-1
    // snapshots of the identity filler column, scaling the energy.
    {
        const auto c = coin_copy_n4();
        const auto fin = build_final_local(c);
        const BasisDescriptor basis = grid_geometry(c).basis();
        const auto phi = history(c, {0});
        const int T = steps_2d(c.n_prime, c.rounds());
        const double p = acceptance_probability(c, {0}).p_accept;
        const double expected = (c.n_prime - 1) * (1.0 - p) / static_cast<double>(T + 1);
        CHECK(expectation_local(fin, basis, phi) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("full bundle at n'=2: completeness, soundness, and term properties") {
    // Accepting instance: every term annihilates the history state and the
    // assembled Hamiltonian has a zero ground energy.
    const auto ca = accept_n2();
    auto ba = build_full_2d(ca);
    const auto ha = assemble_full(ba);
    CHECK(ha.dim() == 14 * 14 * 14);
    const auto ra = min_eigenvalue(ha, EigMode::Dense);
    CHECK(std::abs(ra.lambda_min) <= 1e-9);
    const auto phia = history(ca, {});
    CHECK(std::abs(expectation_local(ba.init, ba.basis, phia)) <= 1e-12);
    CHECK(std::abs(expectation_local(ba.prop, ba.basis, phia)) <= 1e-12);
    CHECK(std::abs(expectation_local(ba.fin, ba.basis, phia)) <= 1e-12);
    CHECK(std::abs(expectation_local(ba.penalty, ba.basis, phia)) <= 1e-12);

    // Every named term is PSD on the full space at this size.
    for (const auto& [name, terms] : ba.named_terms()) {
        const auto op = assemble(*terms, ba.basis);
        CHECK(dense_eigenvalues(op).front() >= -1e-9);
        CHECK(check_stoquastic_term(op, name).pass);
    }

    // Rejecting instance: strictly positive ground energy.
    const auto cr = reject_n2();
    auto br = build_full_2d(cr);
    const auto hr = assemble_full(br);
    const auto rr = min_eigenvalue(hr, EigMode::Dense);
    CHECK(rr.lambda_min > 1e-6);

    // delta = 0 removes the only term that can see the rejection.
    auto b0 = build_full_2d(cr, {}, 0.0);
    const auto h0 = assemble_full(b0);
    CHECK(std::abs(min_eigenvalue(h0, EigMode::Dense).lambda_min) <= 1e-10);
}

TEST_CASE("geometric bound certifies the rejecting instance at n'=2") {
    const auto c = reject_n2();
    const auto sector = trace_sector(c);
    const BasisDescriptor basis = grid_geometry(c).basis();
    auto b = build_full_2d(c);
    // A1 = init + final, A2 = prop/2 on the trace sector (penalty vanishes there).
    std::vector<LocalTerm> a1_terms = b.init;
    a1_terms.insert(a1_terms.end(), b.fin.begin(), b.fin.end());
    const auto a1 = restrict_local(a1_terms, basis, sector);
    const auto a2 = restrict_local(b.prop, basis, sector, 0.5);
    const auto pen = restrict_local(b.penalty, basis, sector);
    for (const auto& t : pen.triples()) {
        CHECK(t.value == 0.0);
    }
    const auto gb = geometric_bound(a1, a2);
    CHECK(gb.bound > 0.0);
    CHECK(gb.lambda_min_sum >= gb.bound - 1e-9);
    // The restricted minimum agrees with the full-space dense minimum: the
    // sector is an invariant subspace at this size.
    const auto full = min_eigenvalue(assemble_full(b), EigMode::Dense);
    CHECK(gb.lambda_min_sum == doctest::Approx(full.lambda_min).epsilon(1e-8));
    // Off the shared null space, init+final steps in units of one.
    const auto ev1 = dense_eigenvalues(a1);
    double smallest_nonzero = 0.0;
    for (double v : ev1) {
        if (v > 1e-9) {
            smallest_nonzero = v;
            break;
        }
    }
    CHECK(smallest_nonzero == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reachable closure equals the trace length at n'=2") {
    const auto c = reject_n2();
    auto b = build_full_2d(c);
    const auto prop = assemble(b.prop, b.basis);
    const auto steps = build_steps_2d(c);
    const auto trace = trace_2d(c, {0, 0}, steps);
    const auto seed = encode_snapshot_2d(trace.front(), b.basis);
    const auto closure = reachable_closure(prop, {seed});
    CHECK(closure.size() == trace.size());
}

TEST_CASE("full assembly respects the size cap") {
    const auto c = coin_copy_n4();
    auto b = build_full_2d(c);
    CHECK_THROWS_AS(assemble_full(b, 1000), std::invalid_argument);
}
