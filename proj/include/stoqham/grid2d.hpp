#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoqham/circuit.hpp"
#include "stoqham/sparse.hpp"

namespace stoqham {

// ---------------------------------------------------------------------------
// 14-state site space
// ---------------------------------------------------------------------------
//
// Unborn and Dead are one-dimensional markers; BB, CB and CC carry two
// encoded qubits each (payload bit 0 = upper wire of the site's pair,
// bit 1 = lower). CB means the upper qubit has been acted on, CC both.

enum class Tag2D : std::uint8_t { Unborn = 0, Dead, BB, CB, CC };

constexpr int kSiteDim2D = 14;

inline bool tag_has_payload(Tag2D t) { return t == Tag2D::BB || t == Tag2D::CB || t == Tag2D::CC; }

inline int site_index_2d(Tag2D t, int payload = 0) {
    switch (t) {
        case Tag2D::Unborn:
            return 0;
        case Tag2D::Dead:
            return 1;
        case Tag2D::BB:
            return 2 + payload;
        case Tag2D::CB:
            return 6 + payload;
        case Tag2D::CC:
            return 10 + payload;
    }
    return -1;
}

struct ParticleState2D {
    Tag2D tag = Tag2D::Unborn;
    int payload = -1;  // 0..3 for BB/CB/CC, -1 otherwise
};

inline std::vector<ParticleState2D> site_basis_2d() {
    std::vector<ParticleState2D> out;
    out.push_back({Tag2D::Unborn, -1});
    out.push_back({Tag2D::Dead, -1});
    for (Tag2D t : {Tag2D::BB, Tag2D::CB, Tag2D::CC}) {
        for (int p = 0; p < 4; ++p) {
            out.push_back({t, p});
        }
    }
    return out;
}

inline const char* tag_mnemonic_2d(Tag2D t) {
    switch (t) {
        case Tag2D::Unborn:
            return "U";
        case Tag2D::Dead:
            return "D";
        case Tag2D::BB:
            return "BB";
        case Tag2D::CB:
            return "CB";
        case Tag2D::CC:
            return "CC";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Grid geometry and shapes
// ---------------------------------------------------------------------------

struct GridGeom {
    int rows = 0;  // n'/2
    int cols = 0;  // 2R+1

    int site(int row, int col) const { return (row - 1) * cols + (col - 1); }
    int site_count() const { return rows * cols; }

    BasisDescriptor basis() const { return {site_count(), kSiteDim2D}; }
};

inline GridGeom grid_geometry(const LayeredCircuit& c) {
    return {c.n_prime / 2, 2 * c.rounds() + 1};
}

/// Payload-free tag assignment for the whole grid.
struct GridShape {
    int rows = 0;
    int cols = 0;
    std::vector<Tag2D> tags;

    Tag2D at(int row, int col) const { return tags[(row - 1) * cols + (col - 1)]; }
    Tag2D& at(int row, int col) { return tags[(row - 1) * cols + (col - 1)]; }
    bool operator==(const GridShape& o) const = default;
};

inline std::string shape_to_string(const GridShape& s) {
    std::ostringstream out;
    for (int r = 1; r <= s.rows; ++r) {
        for (int c = 1; c <= s.cols; ++c) {
            out << (c > 1 ? " " : "") << tag_mnemonic_2d(s.at(r, c));
        }
        out << "\n";
    }
    return out.str();
}

namespace detail2d {

/// Active column mid-gate-phase: m of the column's n' qubits are double-lined.
inline GridShape down_shape(const GridGeom& g, int col, int m) {
    GridShape s{g.rows, g.cols, std::vector<Tag2D>(g.site_count(), Tag2D::Unborn)};
    for (int c = 1; c < col; ++c) {
        for (int r = 1; r <= g.rows; ++r) {
            s.at(r, c) = Tag2D::Dead;
        }
    }
    const int full = m / 2;
    const bool half = (m % 2) != 0;
    for (int r = 1; r <= g.rows; ++r) {
        s.at(r, col) = r <= full ? Tag2D::CC : (half && r == full + 1 ? Tag2D::CB : Tag2D::BB);
    }
    return s;
}

/// Column transition mid-move: the bottom k rows have crossed to col+1.
inline GridShape up_shape(const GridGeom& g, int col, int k) {
    GridShape s{g.rows, g.cols, std::vector<Tag2D>(g.site_count(), Tag2D::Unborn)};
    for (int c = 1; c < col; ++c) {
        for (int r = 1; r <= g.rows; ++r) {
            s.at(r, c) = Tag2D::Dead;
        }
    }
    for (int r = 1; r <= g.rows; ++r) {
        s.at(r, col) = r <= g.rows - k ? Tag2D::CC : Tag2D::Dead;
        s.at(r, col + 1) = r <= g.rows - k ? Tag2D::Unborn : Tag2D::BB;
    }
    return s;
}

}  // namespace detail2d

/// Enumerates the legal shapes in time order. The list length is T+1 where T
/// is the number of propagation steps.
inline std::vector<GridShape> legal_shapes(int n_prime, int rounds) {
    if (n_prime <= 0 || n_prime % 2 != 0 || rounds < 1) {
        throw std::invalid_argument("legal_shapes: need even n' > 0 and R >= 1");
    }
    const GridGeom g{n_prime / 2, 2 * rounds + 1};
    std::vector<GridShape> out;
    for (int m = 0; m <= n_prime; ++m) {
        out.push_back(detail2d::down_shape(g, 1, m));
    }
    for (int c = 1; c < g.cols; ++c) {
        for (int k = 1; k <= g.rows - 1; ++k) {
            out.push_back(detail2d::up_shape(g, c, k));
        }
        for (int m = 0; m <= n_prime; ++m) {
            out.push_back(detail2d::down_shape(g, c + 1, m));
        }
    }
    return out;
}

inline int steps_2d(int n_prime, int rounds) {
    const GridGeom g{n_prime / 2, 2 * rounds + 1};
    return g.cols * n_prime + (g.cols - 1) * g.rows;
}

// ---------------------------------------------------------------------------
// Penalty rules
// ---------------------------------------------------------------------------

struct PatternRule2D {
    enum class Geometry { SingleSite, HorizontalPair, VerticalPair };
    enum class Placement { Anywhere, FirstColumn, LastColumn, TopLeft, TopRight };

    Geometry geometry = Geometry::HorizontalPair;
    Placement placement = Placement::Anywhere;
    std::vector<Tag2D> first;   // forbidden tags for the first site
    std::vector<Tag2D> second;  // forbidden tags for the second site (pairs)
    std::string note;
};

/// The locally checkable forbidden patterns. Horizontal pairs read
/// (left, right); vertical pairs read (upper, lower).
inline std::vector<PatternRule2D> penalty_rules() {
    using G = PatternRule2D::Geometry;
    using P = PatternRule2D::Placement;
    const std::vector<Tag2D> data = {Tag2D::BB, Tag2D::CB, Tag2D::CC};
    const std::vector<Tag2D> not_dead = {Tag2D::Unborn, Tag2D::BB, Tag2D::CB, Tag2D::CC};
    const std::vector<Tag2D> not_unborn = {Tag2D::Dead, Tag2D::BB, Tag2D::CB, Tag2D::CC};
    std::vector<PatternRule2D> rules;
    // Horizontal anywhere.
    rules.push_back({G::HorizontalPair, P::Anywhere, not_dead, {Tag2D::Dead},
                     "left of a dead site must be dead"});
    rules.push_back({G::HorizontalPair, P::Anywhere, {Tag2D::Unborn}, not_unborn,
                     "right of an unborn site must be unborn"});
    rules.push_back({G::HorizontalPair, P::Anywhere, {Tag2D::Dead}, {Tag2D::Unborn},
                     "dead and unborn must not touch"});
    rules.push_back({G::HorizontalPair, P::Anywhere, data, data,
                     "data sites must not be horizontally adjacent"});
    // Vertical anywhere.
    rules.push_back({G::VerticalPair, P::Anywhere, {Tag2D::Unborn}, {Tag2D::Dead, Tag2D::CB, Tag2D::CC},
                     "below an unborn site only unborn or fresh data"});
    rules.push_back({G::VerticalPair, P::Anywhere, {Tag2D::Dead}, not_dead,
                     "below a dead site only dead"});
    rules.push_back({G::VerticalPair, P::Anywhere, {Tag2D::BB}, {Tag2D::Unborn, Tag2D::Dead, Tag2D::CB, Tag2D::CC},
                     "below fresh data only fresh data"});
    rules.push_back({G::VerticalPair, P::Anywhere, {Tag2D::CB}, {Tag2D::Unborn, Tag2D::Dead, Tag2D::CB, Tag2D::CC},
                     "a half-touched site sits directly above fresh data"});
    rules.push_back({G::VerticalPair, P::Anywhere, {Tag2D::CC}, {Tag2D::Unborn},
                     "unborn never sits below finished data"});
    // Boundary placements.
    rules.push_back({G::SingleSite, P::TopLeft, {Tag2D::Unborn}, {}, "the input corner is never unborn"});
    rules.push_back({G::SingleSite, P::TopRight, {Tag2D::Dead}, {}, "the output corner is never dead"});
    rules.push_back({G::VerticalPair, P::LastColumn, {Tag2D::CC}, {Tag2D::Dead},
                     "the final column never starts dying"});
    rules.push_back({G::VerticalPair, P::FirstColumn, {Tag2D::Unborn}, {Tag2D::BB},
                     "the first column never receives a move"});
    return rules;
}

/// Number of forbidden-pattern matches in a tag assignment: the diagonal of
/// the penalty term on that shape (payloads do not enter).
inline int penalty_energy(const GridShape& s, const std::vector<PatternRule2D>& rules) {
    using G = PatternRule2D::Geometry;
    using P = PatternRule2D::Placement;
    int hits = 0;
    auto contains = [](const std::vector<Tag2D>& v, Tag2D t) {
        return std::find(v.begin(), v.end(), t) != v.end();
    };
    for (const auto& rule : rules) {
        auto col_ok = [&](int c) {
            switch (rule.placement) {
                case P::FirstColumn:
                    return c == 1;
                case P::LastColumn:
                    return c == s.cols;
                default:
                    return true;
            }
        };
        if (rule.geometry == G::SingleSite) {
            for (int r = 1; r <= s.rows; ++r) {
                for (int c = 1; c <= s.cols; ++c) {
                    if (rule.placement == P::TopLeft && (r != 1 || c != 1)) {
                        continue;
                    }
                    if (rule.placement == P::TopRight && (r != 1 || c != s.cols)) {
                        continue;
                    }
                    if ((rule.placement == P::FirstColumn && c != 1) ||
                        (rule.placement == P::LastColumn && c != s.cols)) {
                        continue;
                    }
                    if (contains(rule.first, s.at(r, c))) {
                        ++hits;
                    }
                }
            }
        } else if (rule.geometry == G::HorizontalPair) {
            for (int r = 1; r <= s.rows; ++r) {
                for (int c = 1; c < s.cols; ++c) {
                    if (contains(rule.first, s.at(r, c)) && contains(rule.second, s.at(r, c + 1))) {
                        ++hits;
                    }
                }
            }
        } else {
            for (int r = 1; r < s.rows; ++r) {
                for (int c = 1; c <= s.cols; ++c) {
                    if (!col_ok(c)) {
                        continue;
                    }
                    if (contains(rule.first, s.at(r, c)) && contains(rule.second, s.at(r + 1, c))) {
                        ++hits;
                    }
                }
            }
        }
    }
    return hits;
}

/// Local-block decomposition of the penalty term: one diagonal block per
/// placement of each rule, projecting onto the forbidden tag patterns with
/// payloads summed over.
inline std::vector<LocalTerm> build_penalty_local(const GridGeom& g) {
    using G = PatternRule2D::Geometry;
    using P = PatternRule2D::Placement;
    std::vector<LocalTerm> terms;
    auto payload_states = [](Tag2D t) {
        std::vector<int> out;
        if (tag_has_payload(t)) {
            for (int p = 0; p < 4; ++p) {
                out.push_back(site_index_2d(t, p));
            }
        } else {
            out.push_back(site_index_2d(t));
        }
        return out;
    };
    for (const auto& rule : penalty_rules()) {
        auto add_single = [&](int site) {
            LocalTerm lt = LocalTerm::zero({site}, kSiteDim2D, rule.note);
            for (Tag2D t : rule.first) {
                for (int a : payload_states(t)) {
                    lt.at(a, a) += 1.0;
                }
            }
            terms.push_back(std::move(lt));
        };
        auto add_pair = [&](int s0, int s1) {
            LocalTerm lt = LocalTerm::zero({s0, s1}, kSiteDim2D, rule.note);
            for (Tag2D t0 : rule.first) {
                for (Tag2D t1 : rule.second) {
                    for (int a : payload_states(t0)) {
                        for (int b : payload_states(t1)) {
                            const int l = a + kSiteDim2D * b;
                            lt.at(l, l) += 1.0;
                        }
                    }
                }
            }
            terms.push_back(std::move(lt));
        };
        switch (rule.geometry) {
            case G::SingleSite:
                if (rule.placement == P::TopLeft) {
                    add_single(g.site(1, 1));
                } else if (rule.placement == P::TopRight) {
                    add_single(g.site(1, g.cols));
                } else {
                    for (int r = 1; r <= g.rows; ++r) {
                        for (int c = 1; c <= g.cols; ++c) {
                            add_single(g.site(r, c));
                        }
                    }
                }
                break;
            case G::HorizontalPair:
                for (int r = 1; r <= g.rows; ++r) {
                    for (int c = 1; c < g.cols; ++c) {
                        add_pair(g.site(r, c), g.site(r, c + 1));
                    }
                }
                break;
            case G::VerticalPair: {
                const int c0 = rule.placement == P::LastColumn ? g.cols : 1;
                const int c1 = rule.placement == P::FirstColumn ? 1 : g.cols;
                for (int r = 1; r < g.rows; ++r) {
                    for (int c = c0; c <= c1; ++c) {
                        add_pair(g.site(r, c), g.site(r + 1, c));
                    }
                }
                break;
            }
        }
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Propagation steps
// ---------------------------------------------------------------------------

struct TagPattern2D {
    std::vector<std::pair<int, Tag2D>> req;  // (flat site, tag)
};

struct Step2D {
    std::vector<int> sites;                     // sites the move touches (1 or 2)
    std::vector<std::pair<int, int>> moves;     // local source -> target states
    TagPattern2D before_id;                     // unique identifier of the prior shape
    TagPattern2D after_id;                      // unique identifier of the next shape
    std::string label;
};

namespace detail2d {

/// Truth table of a 3-qubit slot gate on the wire window lo_wire..lo_wire+2.
/// Bits are passed in circuit wire order.
inline std::array<int, 3> apply_slot_gate(const Gate& g, std::array<int, 3> bits, int lo_wire) {
    std::vector<int> reg(lo_wire + 2, 0);
    for (int i = 0; i < 3; ++i) {
        reg[lo_wire - 1 + i] = bits[i];
    }
    g.apply(reg);
    for (int i = 0; i < 3; ++i) {
        bits[i] = reg[lo_wire - 1 + i];
    }
    return bits;
}

inline const ComputationalLayer& column_layer(const LayeredCircuit& c, int col,
                                              const ComputationalLayer& identities) {
    if (col % 2 == 0 && col / 2 <= c.rounds()) {
        return c.layers[col / 2 - 1];
    }
    return identities;
}

}  // namespace detail2d

/// The ordered propagation steps: every column runs its gate phase top-down
/// (columns 2,4,...,2R carry the circuit's computational layers, odd columns
/// identity fillers), and every column boundary is crossed bottom-up by
/// two-qubit identity moves that reset double lines.
inline std::vector<Step2D> build_steps_2d(const LayeredCircuit& c) {
    c.validate();
    const GridGeom g = grid_geometry(c);
    const int n = c.n_prime;
    const int L = g.rows;
    const ComputationalLayer identities = ComputationalLayer::identities(n);
    std::vector<Step2D> steps;

    auto down_steps = [&](int col) {
        const ComputationalLayer& layer = detail2d::column_layer(c, col, identities);
        for (int m = 1; m <= n; ++m) {
            Step2D st;
            st.label = "col" + std::to_string(col) + ":gate" + std::to_string(m);
            const Gate& gate = layer.gates[m - 1];
            if (m == 1) {
                st.sites = {g.site(1, col)};
                for (int p = 0; p < 4; ++p) {
                    const int b0 = p >> 1, b1 = p & 1;
                    std::vector<int> reg{b0, b1};
                    gate.apply(reg);
                    st.moves.push_back({site_index_2d(Tag2D::BB, p),
                                        site_index_2d(Tag2D::CB, (reg[0] << 1) | reg[1])});
                }
                st.before_id.req = {{g.site(1, col), Tag2D::BB}};
                st.after_id.req = {{g.site(1, col), Tag2D::CB}};
            } else if (m == 2) {
                st.sites = {g.site(1, col)};
                for (int p = 0; p < 4; ++p) {
                    st.moves.push_back({site_index_2d(Tag2D::CB, p), site_index_2d(Tag2D::CC, p)});
                }
                st.before_id.req = {{g.site(1, col), Tag2D::CB}};
                if (L == 1) {
                    st.after_id.req = {{g.site(1, col), Tag2D::CC}};
                } else {
                    st.after_id.req = {{g.site(1, col), Tag2D::CC}, {g.site(2, col), Tag2D::BB}};
                }
            } else if (m % 2 == 1) {
                const int k = (m - 1) / 2;
                st.sites = {g.site(k, col), g.site(k + 1, col)};
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) {
                        for (int e = 0; e < 2; ++e) {
                            for (int f = 0; f < 2; ++f) {
                                const auto r = detail2d::apply_slot_gate(gate, {a, b, e}, m - 2);
                                const int src = site_index_2d(Tag2D::CC, (a << 1) | b) +
                                                kSiteDim2D * site_index_2d(Tag2D::BB, (e << 1) | f);
                                const int tgt = site_index_2d(Tag2D::CC, (r[0] << 1) | r[1]) +
                                                kSiteDim2D * site_index_2d(Tag2D::CB, (r[2] << 1) | f);
                                st.moves.push_back({src, tgt});
                            }
                        }
                    }
                }
                st.before_id.req = {{g.site(k, col), Tag2D::CC}, {g.site(k + 1, col), Tag2D::BB}};
                st.after_id.req = {{g.site(k, col), Tag2D::CC}, {g.site(k + 1, col), Tag2D::CB}};
            } else {
                const int k = m / 2;
                st.sites = {g.site(k - 1, col), g.site(k, col)};
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) {
                        for (int e = 0; e < 2; ++e) {
                            for (int f = 0; f < 2; ++f) {
                                const auto r = detail2d::apply_slot_gate(gate, {b, e, f}, m - 2);
                                const int src = site_index_2d(Tag2D::CC, (a << 1) | b) +
                                                kSiteDim2D * site_index_2d(Tag2D::CB, (e << 1) | f);
                                const int tgt = site_index_2d(Tag2D::CC, (a << 1) | r[0]) +
                                                kSiteDim2D * site_index_2d(Tag2D::CC, (r[1] << 1) | r[2]);
                                st.moves.push_back({src, tgt});
                            }
                        }
                    }
                }
                st.before_id.req = {{g.site(k - 1, col), Tag2D::CC}, {g.site(k, col), Tag2D::CB}};
                st.after_id.req = {{g.site(k - 1, col), Tag2D::CC}, {g.site(k, col), Tag2D::CC}};
            }
            steps.push_back(std::move(st));
        }
    };

    auto cross_steps = [&](int col) {
        for (int k = 1; k <= L; ++k) {
            const int i = L - k + 1;
            Step2D st;
            st.label = "cross" + std::to_string(col) + ":row" + std::to_string(i);
            st.sites = {g.site(i, col), g.site(i, col + 1)};
            for (int p = 0; p < 4; ++p) {
                st.moves.push_back({site_index_2d(Tag2D::CC, p) + kSiteDim2D * site_index_2d(Tag2D::Unborn),
                                    site_index_2d(Tag2D::Dead) + kSiteDim2D * site_index_2d(Tag2D::BB, p)});
            }
            if (k == 1) {
                st.before_id.req = {{g.site(L, col), Tag2D::CC}};
            } else {
                st.before_id.req = {{g.site(i, col), Tag2D::CC}, {g.site(i + 1, col), Tag2D::Dead}};
            }
            if (k == L) {
                st.after_id.req = {{g.site(1, col + 1), Tag2D::BB}};
            } else {
                st.after_id.req = {{g.site(i - 1, col + 1), Tag2D::Unborn}, {g.site(i, col + 1), Tag2D::BB}};
            }
            steps.push_back(std::move(st));
        }
    };

    down_steps(1);
    for (int col = 1; col < g.cols; ++col) {
        cross_steps(col);
        down_steps(col + 1);
    }
    return steps;
}

/// Propagation term as local blocks: per step, half the projector onto each
/// of the two shape identifiers plus the signed data move. Restricted to the
/// legal sector this sums to the standard random-walk matrix.
inline std::vector<LocalTerm> build_prop_local(const LayeredCircuit& c) {
    for (const auto& layer : c.layers) {
        for (const auto& gate : layer.gates) {
            if (gate.kind == GateKind::Toffoli || gate.kind == GateKind::X ||
                gate.kind == GateKind::Identity1 || gate.kind == GateKind::Identity2 ||
                gate.kind == GateKind::Identity3) {
                continue;
            }
            throw std::invalid_argument("build_prop_local: non-classical gate kind");
        }
    }
    std::vector<LocalTerm> terms;
    auto anchor_term = [&](const TagPattern2D& pat, const std::string& label) {
        std::vector<int> sites;
        for (const auto& [s, t] : pat.req) {
            sites.push_back(s);
        }
        LocalTerm lt = LocalTerm::zero(sites, kSiteDim2D, label);
        const int ld = lt.local_dim();
        for (int l = 0; l < ld; ++l) {
            bool match = true;
            int rem = l;
            for (std::size_t i = 0; i < pat.req.size(); ++i) {
                const int st = rem % kSiteDim2D;
                rem /= kSiteDim2D;
                const Tag2D want = pat.req[i].second;
                const int lo = site_index_2d(want, 0);
                const int hi = tag_has_payload(want) ? lo + 3 : lo;
                if (st < lo || st > hi) {
                    match = false;
                    break;
                }
            }
            if (match) {
                lt.at(l, l) += 0.5;
            }
        }
        terms.push_back(std::move(lt));
    };
    for (const auto& st : build_steps_2d(c)) {
        anchor_term(st.before_id, st.label + ":before");
        anchor_term(st.after_id, st.label + ":after");
        LocalTerm mv = LocalTerm::zero(st.sites, kSiteDim2D, st.label + ":move");
        for (const auto& [src, tgt] : st.moves) {
            mv.at(tgt, src) += -0.5;
            mv.at(src, tgt) += -0.5;
        }
        terms.push_back(std::move(mv));
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Initial and final terms
// ---------------------------------------------------------------------------

/// Column-1 checks. Each term is diagonal except the coin defect, which is
/// the rank-one complement of the uniform coin state inside the BB block and
/// has off-diagonal entries -1/2.
inline std::vector<LocalTerm> build_init_local(const LayeredCircuit& c,
                                               const std::vector<int>& input_bits = {}) {
    c.validate();
    const GridGeom g = grid_geometry(c);
    std::vector<int> inputs;
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Input0 || c.roles[w - 1] == WireRole::Input1) {
            inputs.push_back(w);
        }
    }
    if (!input_bits.empty() && input_bits.size() != inputs.size()) {
        throw std::invalid_argument("build_init_local: input override length mismatch");
    }
    std::vector<LocalTerm> terms;
    for (int i = 1; i <= g.rows; ++i) {
        LocalTerm lt = LocalTerm::zero({g.site(i, 1)}, kSiteDim2D, "init:row" + std::to_string(i));
        bool used = false;
        for (int half = 0; half < 2; ++half) {
            const int w = 2 * i - 1 + half;
            const WireRole role = c.roles[w - 1];
            if (role == WireRole::Witness) {
                continue;
            }
            used = true;
            if (role == WireRole::Coin) {
                for (int other = 0; other < 2; ++other) {
                    const int p0 = half == 0 ? other : (other << 1);
                    const int p1 = half == 0 ? (2 | other) : ((other << 1) | 1);
                    const int a = site_index_2d(Tag2D::BB, p0);
                    const int b = site_index_2d(Tag2D::BB, p1);
                    lt.at(a, a) += 0.5;
                    lt.at(b, b) += 0.5;
                    lt.at(a, b) += -0.5;
                    lt.at(b, a) += -0.5;
                }
            } else {
                int want = 0;
                if (role == WireRole::Input1) {
                    want = 1;
                }
                if (!input_bits.empty() &&
                    (role == WireRole::Input0 || role == WireRole::Input1)) {
                    const auto it = std::find(inputs.begin(), inputs.end(), w);
                    want = input_bits[it - inputs.begin()] & 1;
                }
                for (int p = 0; p < 4; ++p) {
                    const int bit = half == 0 ? (p >> 1) : (p & 1);
                    if (bit != want) {
                        const int a = site_index_2d(Tag2D::BB, p);
                        lt.at(a, a) += 1.0;
                    }
                }
            }
        }
        if (used) {
            terms.push_back(std::move(lt));
        }
    }
    return terms;
}

/// Projector onto the rejecting data states of the top-right site: finished
/// data whose output payload bit reads 0.
inline std::vector<LocalTerm> build_final_local(const LayeredCircuit& c) {
    c.validate();
    const GridGeom g = grid_geometry(c);
    const int out = c.output_wire();
    if (out != 1 && out != 2) {
        throw std::invalid_argument(
            "build_final_local: the output wire must be wire 1 or 2 (top site of the last column)");
    }
    LocalTerm lt = LocalTerm::zero({g.site(1, g.cols)}, kSiteDim2D, "final");
    for (int p = 0; p < 4; ++p) {
        const int bit = out == 1 ? (p >> 1) : (p & 1);
        if (bit == 0) {
            const int a = site_index_2d(Tag2D::CC, p);
            lt.at(a, a) += 1.0;
        }
    }
    return {lt};
}

// ---------------------------------------------------------------------------
// Trace encoding and the full bundle
// ---------------------------------------------------------------------------

struct Site2DState {
    Tag2D tag = Tag2D::Unborn;
    int payload = 0;
};

using Snapshot2D = std::vector<Site2DState>;

inline index_t encode_snapshot_2d(const Snapshot2D& snap, const BasisDescriptor& basis) {
    index_t idx = 0;
    index_t stride = 1;
    for (int s = 0; s < basis.site_count; ++s) {
        idx += stride * site_index_2d(snap[s].tag, snap[s].payload);
        stride *= kSiteDim2D;
    }
    return idx;
}

/// Encoded snapshots of the whole evolution for a basis input x (bit per
/// wire). Snapshot t corresponds to legal shape t.
inline std::vector<Snapshot2D> trace_2d(const LayeredCircuit& c, const std::vector<int>& x,
                                        const std::vector<Step2D>& steps) {
    const GridGeom g = grid_geometry(c);
    if (static_cast<int>(x.size()) != c.n_prime) {
        throw std::invalid_argument("trace_2d: input length must equal n'");
    }
    Snapshot2D snap(g.site_count());
    for (int i = 1; i <= g.rows; ++i) {
        snap[g.site(i, 1)] = {Tag2D::BB, (x[2 * i - 2] << 1) | x[2 * i - 1]};
    }
    std::vector<Snapshot2D> out{snap};
    for (const auto& st : steps) {
        int local = 0;
        int stride = 1;
        for (int s : st.sites) {
            local += stride * site_index_2d(snap[s].tag, snap[s].payload);
            stride *= kSiteDim2D;
        }
        bool moved = false;
        for (const auto& [src, tgt] : st.moves) {
            if (src == local) {
                int rem = tgt;
                for (int s : st.sites) {
                    const int v = rem % kSiteDim2D;
                    rem /= kSiteDim2D;
                    Site2DState ns;
                    if (v == 0) {
                        ns = {Tag2D::Unborn, 0};
                    } else if (v == 1) {
                        ns = {Tag2D::Dead, 0};
                    } else if (v < 6) {
                        ns = {Tag2D::BB, v - 2};
                    } else if (v < 10) {
                        ns = {Tag2D::CB, v - 6};
                    } else {
                        ns = {Tag2D::CC, v - 10};
                    }
                    snap[s] = ns;
                }
                moved = true;
                break;
            }
        }
        if (!moved) {
            throw std::logic_error("trace_2d: step " + st.label + " does not apply to the snapshot");
        }
        out.push_back(snap);
    }
    return out;
}

/// History state over the encoded trace: (1/sqrt(T+1)) sum_t Enc(U_t...U_1 phi0),
/// with phi0 given as a dense vector over the n'-qubit computational basis.
inline SparseVec history_state_2d(const LayeredCircuit& c, const std::vector<double>& phi0) {
    const auto steps = build_steps_2d(c);
    const GridGeom g = grid_geometry(c);
    const BasisDescriptor basis = g.basis();
    const index_t nx = INT64_C(1) << c.n_prime;
    if (static_cast<index_t>(phi0.size()) != nx) {
        throw std::invalid_argument("history_state_2d: phi0 must have dimension 2^n'");
    }
    SparseVec out;
    const double norm = 1.0 / std::sqrt(static_cast<double>(steps.size() + 1));
    for (index_t xv = 0; xv < nx; ++xv) {
        if (phi0[xv] == 0.0) {
            continue;
        }
        std::vector<int> bits(c.n_prime);
        for (int w = 0; w < c.n_prime; ++w) {
            bits[w] = static_cast<int>((xv >> w) & 1);
        }
        for (const auto& snap : trace_2d(c, bits, steps)) {
            out.push_back({encode_snapshot_2d(snap, basis), phi0[xv] * norm});
        }
    }
    sparsevec_canonicalize(out);
    return out;
}

/// Sorted basis indices of every encoded snapshot over all witness and coin
/// assignments: the invariant-by-construction sector the restricted spectral
/// path works in.
inline std::vector<index_t> trace_sector_basis_2d(const LayeredCircuit& c) {
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

/// The four named terms of the full grid Hamiltonian, kept as local blocks so
/// term-wise properties can be checked at any size. Assembly weights:
/// H = init + prop/2 + delta * final + penalty.
struct HamiltonianBundle2D {
    GridGeom geom;
    BasisDescriptor basis;
    int T = 0;
    double prop_weight = 0.5;
    double final_weight = 1.0;
    std::vector<LocalTerm> init, prop, penalty, fin;

    std::vector<std::pair<std::string, const std::vector<LocalTerm>*>> named_terms() const {
        return {{"init", &init}, {"prop", &prop}, {"penalty", &penalty}, {"final", &fin}};
    }
};

inline HamiltonianBundle2D build_full_2d(const LayeredCircuit& c, const std::vector<int>& input_bits = {},
                                         double delta = 1.0) {
    HamiltonianBundle2D b;
    b.geom = grid_geometry(c);
    b.basis = b.geom.basis();
    b.T = steps_2d(c.n_prime, c.rounds());
    b.final_weight = delta;
    b.init = build_init_local(c, input_bits);
    b.prop = build_prop_local(c);
    b.penalty = build_penalty_local(b.geom);
    b.fin = build_final_local(c);
    return b;
}

/// Assembles the weighted sum of all four terms (guarded by the basis-size cap).
inline SparseOperator assemble_full(const HamiltonianBundle2D& b, index_t cap = 10000000) {
    if (checked_pow(kSiteDim2D, b.basis.site_count) < 0 || b.basis.dim() > cap) {
        throw std::invalid_argument("assemble_full: basis size exceeds the configured cap");
    }
    std::vector<LocalTerm> all;
    auto weighted = [&](const std::vector<LocalTerm>& src, double w) {
        for (LocalTerm lt : src) {
            for (auto& v : lt.mat) {
                v *= w;
            }
            all.push_back(std::move(lt));
        }
    };
    weighted(b.init, 1.0);
    weighted(b.prop, b.prop_weight);
    weighted(b.fin, b.final_weight);
    weighted(b.penalty, 1.0);
    return assemble(all, b.basis);
}

}  // namespace stoqham
