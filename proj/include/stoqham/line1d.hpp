#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoqham/circuit.hpp"
#include "stoqham/sparse.hpp"

namespace stoqham {

// ---------------------------------------------------------------------------
// 19-state site space
// ---------------------------------------------------------------------------
//
// Unborn, Dead and Turn are one-dimensional; BBdata and CCgate carry two
// encoded qubits; QRight, QLeft, RFlag and LFlag carry one payload bit each.
// The RFlag bit transports the qubit displaced during the right sweep. The
// LFlag bit is never set by the legal dynamics (the flag carries no data);
// the spare state is penalized so it cannot host spurious ground states.

enum class Tag1D : std::uint8_t { Unborn = 0, Dead, Turn, BB, CC, QRight, QLeft, RFlag, LFlag };

constexpr int kSiteDim1D = 19;

inline int payload_bits_1d(Tag1D t) {
    switch (t) {
        case Tag1D::BB:
        case Tag1D::CC:
            return 2;
        case Tag1D::QRight:
        case Tag1D::QLeft:
        case Tag1D::RFlag:
        case Tag1D::LFlag:
            return 1;
        default:
            return 0;
    }
}

inline int site_index_1d(Tag1D t, int payload = 0) {
    switch (t) {
        case Tag1D::Unborn:
            return 0;
        case Tag1D::Dead:
            return 1;
        case Tag1D::Turn:
            return 2;
        case Tag1D::BB:
            return 3 + payload;
        case Tag1D::CC:
            return 7 + payload;
        case Tag1D::QRight:
            return 11 + payload;
        case Tag1D::QLeft:
            return 13 + payload;
        case Tag1D::RFlag:
            return 15 + payload;
        case Tag1D::LFlag:
            return 17 + payload;
    }
    return -1;
}

struct ParticleState1D {
    Tag1D tag = Tag1D::Unborn;
    int payload = -1;  // -1 when the tag carries no data
};

inline std::vector<ParticleState1D> site_basis_1d() {
    std::vector<ParticleState1D> out;
    out.push_back({Tag1D::Unborn, -1});
    out.push_back({Tag1D::Dead, -1});
    out.push_back({Tag1D::Turn, -1});
    for (Tag1D t : {Tag1D::BB, Tag1D::CC}) {
        for (int p = 0; p < 4; ++p) {
            out.push_back({t, p});
        }
    }
    for (Tag1D t : {Tag1D::QRight, Tag1D::QLeft, Tag1D::RFlag, Tag1D::LFlag}) {
        for (int p = 0; p < 2; ++p) {
            out.push_back({t, p});
        }
    }
    return out;
}

inline ParticleState1D particle_from_index_1d(int idx) {
    static const std::vector<ParticleState1D> table = site_basis_1d();
    if (idx < 0 || idx >= kSiteDim1D) {
        throw std::out_of_range("particle_from_index_1d");
    }
    return table[idx];
}

inline const char* tag_mnemonic_1d(Tag1D t) {
    switch (t) {
        case Tag1D::Unborn:
            return "U";
        case Tag1D::Dead:
            return "D";
        case Tag1D::Turn:
            return "T";
        case Tag1D::BB:
            return "BB";
        case Tag1D::CC:
            return "CC";
        case Tag1D::QRight:
            return "qR";
        case Tag1D::QLeft:
            return "qL";
        case Tag1D::RFlag:
            return "R";
        case Tag1D::LFlag:
            return "L";
    }
    return "?";
}

inline bool is_active_1d(Tag1D t) {
    return t == Tag1D::CC || t == Tag1D::RFlag || t == Tag1D::LFlag || t == Tag1D::Turn;
}

// ---------------------------------------------------------------------------
// Chain geometry and configurations
// ---------------------------------------------------------------------------

struct ChainGeom {
    int n_prime = 0;
    int blocks = 0;

    int block_len() const { return n_prime - 1; }
    int sites() const { return block_len() * blocks; }
    /// True when the pair (j, j+1) of 0-based sites straddles a block
    /// boundary. j = -1 (chain start) and j = sites-1 (chain end) count as
    /// boundaries too.
    bool boundary_after(int j) const { return (j + 1) % block_len() == 0; }

    BasisDescriptor basis() const { return {sites(), kSiteDim1D}; }
};

struct Site1D {
    Tag1D tag = Tag1D::Unborn;
    int payload = 0;
};

struct ChainConfiguration {
    ChainGeom geom;
    std::vector<Site1D> sites;

    bool operator==(const ChainConfiguration& o) const {
        if (sites.size() != o.sites.size()) {
            return false;
        }
        for (std::size_t i = 0; i < sites.size(); ++i) {
            if (sites[i].tag != o.sites[i].tag || sites[i].payload != o.sites[i].payload) {
                return false;
            }
        }
        return true;
    }

    std::vector<Tag1D> tags() const {
        std::vector<Tag1D> out(sites.size());
        for (std::size_t i = 0; i < sites.size(); ++i) {
            out[i] = sites[i].tag;
        }
        return out;
    }
};

inline std::string chain_to_string(const ChainConfiguration& c) {
    std::ostringstream out;
    for (int j = 0; j < c.geom.sites(); ++j) {
        if (j > 0) {
            out << (c.geom.boundary_after(j - 1) ? " | " : " ");
        }
        out << tag_mnemonic_1d(c.sites[j].tag);
    }
    return out.str();
}

inline index_t encode_chain(const ChainConfiguration& c) {
    index_t idx = 0;
    index_t stride = 1;
    for (const auto& s : c.sites) {
        idx += stride * site_index_1d(s.tag, s.payload);
        stride *= kSiteDim1D;
    }
    return idx;
}

/// Initial chain: block 1 holds the gate flag on wires 1,2 followed by the
/// remaining wires on single-qubit sites; all later blocks are unborn.
inline ChainConfiguration initial_chain(const ChainGeom& g, const std::vector<int>& bits) {
    if (static_cast<int>(bits.size()) != g.n_prime) {
        throw std::invalid_argument("initial_chain: need one bit per wire");
    }
    ChainConfiguration c{g, std::vector<Site1D>(g.sites())};
    c.sites[0] = {Tag1D::CC, (bits[0] << 1) | bits[1]};
    for (int j = 1; j < g.block_len(); ++j) {
        c.sites[j] = {Tag1D::QRight, bits[j + 1]};
    }
    for (int j = g.block_len(); j < g.sites(); ++j) {
        c.sites[j] = {Tag1D::Unborn, 0};
    }
    return c;
}

// ---------------------------------------------------------------------------
// Transition rules
// ---------------------------------------------------------------------------

enum class RuleKind {
    GateApplication,   // 1: CC q -> qL CC, applying the layer's 3-qubit gate
    RightTurnGate,     // 2: CC | U -> L | BB
    LeftSweep,         // 3: qL L -> L qR
    LeftSweepCross,    // 3: BB | L -> L | BB
    LeftTurn,          // 4: D L -> D T (boundary or not; virtual at site 0)
    LeftTurnEmit,      // 4: T q -> D R
    RightSweep,        // 5: R q -> qL R
    RightSweepCross,   // 5: R | BB -> BB | R
    RightTurnSweep,    // 6: R U -> L q
    NewRound,          // 7: T | BB -> D | CC
};

struct TransitionRule1D {
    RuleKind kind;
    int rule_number;
    enum class Where { NonBoundary, Boundary, Both, VirtualLeft } where;
    const char* name;
};

inline const std::vector<TransitionRule1D>& transition_rules_1d() {
    using W = TransitionRule1D::Where;
    static const std::vector<TransitionRule1D> rules = {
        {RuleKind::GateApplication, 1, W::NonBoundary, "gate application"},
        {RuleKind::RightTurnGate, 2, W::Boundary, "right turn after gates"},
        {RuleKind::LeftSweep, 3, W::NonBoundary, "left sweep"},
        {RuleKind::LeftSweepCross, 3, W::Boundary, "left sweep across a boundary"},
        {RuleKind::LeftTurn, 4, W::Both, "left turn"},
        {RuleKind::LeftTurn, 4, W::VirtualLeft, "left turn at the chain start"},
        {RuleKind::LeftTurnEmit, 4, W::NonBoundary, "left turn emits the right flag"},
        {RuleKind::RightSweep, 5, W::NonBoundary, "right sweep"},
        {RuleKind::RightSweepCross, 5, W::Boundary, "right sweep across a boundary"},
        {RuleKind::RightTurnSweep, 6, W::NonBoundary, "right turn during sweeps"},
        {RuleKind::NewRound, 7, W::Boundary, "new round"},
    };
    return rules;
}

namespace detail1d {

/// 3-bit truth table of the computational-layer slot gate applied by the
/// gate flag at block-local position l (1-based): wires (l, l+1, l+2).
inline std::array<int, 3> rule1_gate(const LayeredCircuit& c, int block0, int local1,
                                     std::array<int, 3> bits) {
    const Gate& g = c.layers[block0].gates[local1 + 1];  // slot l+2, 0-based index l+1
    std::vector<int> reg(local1 + 2 + 1, 0);
    for (int i = 0; i < 3; ++i) {
        reg[local1 - 1 + i] = bits[i];
    }
    g.apply(reg);
    for (int i = 0; i < 3; ++i) {
        bits[i] = reg[local1 - 1 + i];
    }
    return bits;
}

/// Local moves of one rule at one placement, over joint states a + 19*b of
/// the pair (or single states for the virtual rule). The gate oracle is only
/// consulted for rule 1.
inline std::vector<std::pair<int, int>> rule_moves(RuleKind kind,
                                                   const std::function<std::array<int, 3>(std::array<int, 3>)>& gate) {
    std::vector<std::pair<int, int>> mv;
    auto pair_idx = [](Tag1D ta, int pa, Tag1D tb, int pb) {
        return site_index_1d(ta, pa) + kSiteDim1D * site_index_1d(tb, pb);
    };
    switch (kind) {
        case RuleKind::GateApplication:
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    for (int e = 0; e < 2; ++e) {
                        const auto r = gate({a, b, e});
                        mv.push_back({pair_idx(Tag1D::CC, (a << 1) | b, Tag1D::QRight, e),
                                      pair_idx(Tag1D::QLeft, r[0], Tag1D::CC, (r[1] << 1) | r[2])});
                    }
                }
            }
            break;
        case RuleKind::RightTurnGate:
            for (int p = 0; p < 4; ++p) {
                mv.push_back({pair_idx(Tag1D::CC, p, Tag1D::Unborn, 0),
                              pair_idx(Tag1D::LFlag, 0, Tag1D::BB, p)});
            }
            break;
        case RuleKind::LeftSweep:
            for (int x = 0; x < 2; ++x) {
                for (int y = 0; y < 2; ++y) {
                    mv.push_back({pair_idx(Tag1D::QLeft, x, Tag1D::LFlag, y),
                                  pair_idx(Tag1D::LFlag, y, Tag1D::QRight, x)});
                }
            }
            break;
        case RuleKind::LeftSweepCross:
            for (int p = 0; p < 4; ++p) {
                for (int y = 0; y < 2; ++y) {
                    mv.push_back({pair_idx(Tag1D::BB, p, Tag1D::LFlag, y),
                                  pair_idx(Tag1D::LFlag, y, Tag1D::BB, p)});
                }
            }
            break;
        case RuleKind::LeftTurn:
            // Only the empty flag turns; the spare flag state is penalized.
            mv.push_back({pair_idx(Tag1D::Dead, 0, Tag1D::LFlag, 0),
                          pair_idx(Tag1D::Dead, 0, Tag1D::Turn, 0)});
            break;
        case RuleKind::LeftTurnEmit:
            for (int x = 0; x < 2; ++x) {
                mv.push_back({pair_idx(Tag1D::Turn, 0, Tag1D::QRight, x),
                              pair_idx(Tag1D::Dead, 0, Tag1D::RFlag, x)});
            }
            break;
        case RuleKind::RightSweep:
            for (int x = 0; x < 2; ++x) {
                for (int y = 0; y < 2; ++y) {
                    mv.push_back({pair_idx(Tag1D::RFlag, x, Tag1D::QRight, y),
                                  pair_idx(Tag1D::QLeft, x, Tag1D::RFlag, y)});
                }
            }
            break;
        case RuleKind::RightSweepCross:
            // R(x) | BB(yz) -> BB(xy) | R(z): the flag deposits its qubit and
            // picks up the displaced one, preserving the line order.
            for (int x = 0; x < 2; ++x) {
                for (int y = 0; y < 2; ++y) {
                    for (int z = 0; z < 2; ++z) {
                        mv.push_back({pair_idx(Tag1D::RFlag, x, Tag1D::BB, (y << 1) | z),
                                      pair_idx(Tag1D::BB, (x << 1) | y, Tag1D::RFlag, z)});
                    }
                }
            }
            break;
        case RuleKind::RightTurnSweep:
            for (int x = 0; x < 2; ++x) {
                mv.push_back({pair_idx(Tag1D::RFlag, x, Tag1D::Unborn, 0),
                              pair_idx(Tag1D::LFlag, 0, Tag1D::QRight, x)});
            }
            break;
        case RuleKind::NewRound:
            for (int p = 0; p < 4; ++p) {
                mv.push_back({pair_idx(Tag1D::Turn, 0, Tag1D::BB, p),
                              pair_idx(Tag1D::Dead, 0, Tag1D::CC, p)});
            }
            break;
    }
    return mv;
}

/// Virtual-left variant of the left turn: a lone empty flag at site 0 turns
/// (the chain start acts as a dead boundary).
inline std::vector<std::pair<int, int>> virtual_left_turn_moves() {
    return {{site_index_1d(Tag1D::LFlag, 0), site_index_1d(Tag1D::Turn, 0)}};
}

/// Gate-independent rule moves, computed once per kind.
inline const std::vector<std::pair<int, int>>& cached_rule_moves(RuleKind kind) {
    static const std::map<RuleKind, std::vector<std::pair<int, int>>> cache = [] {
        std::map<RuleKind, std::vector<std::pair<int, int>>> m;
        for (RuleKind k : {RuleKind::RightTurnGate, RuleKind::LeftSweep, RuleKind::LeftSweepCross,
                           RuleKind::LeftTurn, RuleKind::LeftTurnEmit, RuleKind::RightSweep,
                           RuleKind::RightSweepCross, RuleKind::RightTurnSweep, RuleKind::NewRound}) {
            m[k] = rule_moves(k, {});
        }
        return m;
    }();
    return cache.at(kind);
}

inline std::function<std::array<int, 3>(std::array<int, 3>)> gate_at(const LayeredCircuit& c,
                                                                     const ChainGeom& g, int j) {
    const int block0 = j / g.block_len();
    const int local1 = j % g.block_len() + 1;
    return [&c, block0, local1](std::array<int, 3> bits) {
        return rule1_gate(c, block0, local1, bits);
    };
}

}  // namespace detail1d

struct NoRuleApplies : std::runtime_error {
    NoRuleApplies() : std::runtime_error("no transition rule applies") {}
};

/// Applies the unique matching forward rule. Throws NoRuleApplies on final or
/// stuck configurations and logic_error if more than one rule matches.
inline ChainConfiguration step_forward(const ChainConfiguration& cfg, const LayeredCircuit& c) {
    const ChainGeom& g = cfg.geom;
    ChainConfiguration next = cfg;
    int matches = 0;
    auto local_pair = [&](int j) {
        return site_index_1d(cfg.sites[j].tag, cfg.sites[j].payload) +
               kSiteDim1D * site_index_1d(cfg.sites[j + 1].tag, cfg.sites[j + 1].payload);
    };
    auto write_pair = [&](int j, int local) {
        const auto a = particle_from_index_1d(local % kSiteDim1D);
        const auto b = particle_from_index_1d(local / kSiteDim1D);
        next.sites[j] = {a.tag, std::max(0, a.payload)};
        next.sites[j + 1] = {b.tag, std::max(0, b.payload)};
    };
    for (const auto& rule : transition_rules_1d()) {
        if (rule.where == TransitionRule1D::Where::VirtualLeft) {
            const int s0 = site_index_1d(cfg.sites[0].tag, cfg.sites[0].payload);
            for (const auto& [src, tgt] : detail1d::virtual_left_turn_moves()) {
                if (src == s0) {
                    ++matches;
                    const auto t = particle_from_index_1d(tgt);
                    next.sites[0] = {t.tag, std::max(0, t.payload)};
                }
            }
            continue;
        }
        for (int j = 0; j + 1 < g.sites(); ++j) {
            const bool b = g.boundary_after(j);
            if (rule.where == TransitionRule1D::Where::NonBoundary && b) {
                continue;
            }
            if (rule.where == TransitionRule1D::Where::Boundary && !b) {
                continue;
            }
            const std::vector<std::pair<int, int>> moves =
                rule.kind == RuleKind::GateApplication
                    ? detail1d::rule_moves(rule.kind, detail1d::gate_at(c, g, j))
                    : detail1d::cached_rule_moves(rule.kind);
            const int lp = local_pair(j);
            for (const auto& [src, tgt] : moves) {
                if (src == lp) {
                    ++matches;
                    if (matches > 1) {
                        throw std::logic_error("step_forward: more than one rule matches");
                    }
                    write_pair(j, tgt);
                }
            }
        }
    }
    if (matches == 0) {
        throw NoRuleApplies();
    }
    return next;
}

inline int penalty_energy_1d(const ChainConfiguration& cfg);

/// Applies the matching backward rule. Two pattern families coincide on
/// their targets (a turn flag landing next to parked data looks like a sweep
/// arrival), but the spurious branch always carries a prohibited pattern, so
/// the walk direction is disambiguated by local checkability.
inline ChainConfiguration step_backward(const ChainConfiguration& cfg, const LayeredCircuit& c) {
    const ChainGeom& g = cfg.geom;
    std::vector<ChainConfiguration> candidates;
    auto local_pair = [&](int j) {
        return site_index_1d(cfg.sites[j].tag, cfg.sites[j].payload) +
               kSiteDim1D * site_index_1d(cfg.sites[j + 1].tag, cfg.sites[j + 1].payload);
    };
    auto with_pair = [&](int j, int local) {
        ChainConfiguration prev = cfg;
        const auto a = particle_from_index_1d(local % kSiteDim1D);
        const auto b = particle_from_index_1d(local / kSiteDim1D);
        prev.sites[j] = {a.tag, std::max(0, a.payload)};
        prev.sites[j + 1] = {b.tag, std::max(0, b.payload)};
        return prev;
    };
    for (const auto& rule : transition_rules_1d()) {
        if (rule.where == TransitionRule1D::Where::VirtualLeft) {
            const int s0 = site_index_1d(cfg.sites[0].tag, cfg.sites[0].payload);
            for (const auto& [src, tgt] : detail1d::virtual_left_turn_moves()) {
                if (tgt == s0) {
                    ChainConfiguration prev = cfg;
                    const auto t = particle_from_index_1d(src);
                    prev.sites[0] = {t.tag, std::max(0, t.payload)};
                    candidates.push_back(std::move(prev));
                }
            }
            continue;
        }
        for (int j = 0; j + 1 < g.sites(); ++j) {
            const bool b = g.boundary_after(j);
            if (rule.where == TransitionRule1D::Where::NonBoundary && b) {
                continue;
            }
            if (rule.where == TransitionRule1D::Where::Boundary && !b) {
                continue;
            }
            const std::vector<std::pair<int, int>> moves =
                rule.kind == RuleKind::GateApplication
                    ? detail1d::rule_moves(rule.kind, detail1d::gate_at(c, g, j))
                    : detail1d::cached_rule_moves(rule.kind);
            const int lp = local_pair(j);
            for (const auto& [src, tgt] : moves) {
                if (tgt == lp) {
                    candidates.push_back(with_pair(j, src));
                }
            }
        }
    }
    if (candidates.empty()) {
        throw NoRuleApplies();
    }
    if (candidates.size() == 1) {
        return candidates.front();
    }
    std::vector<ChainConfiguration> clean;
    for (auto& cand : candidates) {
        if (penalty_energy_1d(cand) == 0) {
            clean.push_back(std::move(cand));
        }
    }
    if (clean.size() > 1) {
        throw std::logic_error("step_backward: ambiguous checkable-free predecessors");
    }
    return clean.size() == 1 ? clean.front() : candidates.front();
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// Full evolution from the initial chain until no rule applies. The returned
/// list has (2n'-1)(n'-1)(R-1) + (n'-1) configurations.
inline std::vector<ChainConfiguration> full_trace_1d(const LayeredCircuit& c,
                                                     const std::vector<int>& bits) {
    const ChainGeom g{c.n_prime, c.rounds()};
    std::vector<ChainConfiguration> out{initial_chain(g, bits)};
    for (;;) {
        try {
            out.push_back(step_forward(out.back(), c));
        } catch (const NoRuleApplies&) {
            break;
        }
    }
    return out;
}

inline int trace_length_formula_1d(int n_prime, int rounds) {
    return (2 * n_prime - 1) * (n_prime - 1) * (rounds - 1) + (n_prime - 1);
}

/// One full gate-plus-reset cycle on a two-block chain with identity gates:
/// (n'-1)(2n'-1) transitions.
inline std::vector<ChainConfiguration> run_cycle(int n_prime) {
    if (n_prime <= 0 || n_prime % 2 != 0) {
        throw std::invalid_argument("run_cycle: n' must be even and positive");
    }
    std::vector<WireRole> roles(n_prime, WireRole::Witness);
    roles[n_prime - 1] = WireRole::Output;
    LayeredCircuit c = normalize({}, roles);
    c.layers.assign(2, ComputationalLayer::identities(n_prime));
    const ChainGeom g{n_prime, 2};
    std::vector<ChainConfiguration> out{initial_chain(g, std::vector<int>(n_prime, 0))};
    const int steps = (n_prime - 1) * (2 * n_prime - 1);
    for (int s = 0; s < steps; ++s) {
        out.push_back(step_forward(out.back(), c));
    }
    return out;
}

/// The reference cycle trace for four wires (22 rows, '|' marks block
/// boundaries), reproduced by run_cycle(4) row for row.
inline std::vector<std::string> reference_cycle_trace_4() {
    return {
        "CC qR qR | U U U",  "qL CC qR | U U U",  "qL qL CC | U U U",  "qL qL L | BB U U",
        "qL L qR | BB U U",  "L qR qR | BB U U",  "T qR qR | BB U U",  "D R qR | BB U U",
        "D qL R | BB U U",   "D qL BB | R U U",   "D qL BB | L qR U",  "D qL L | BB qR U",
        "D L qR | BB qR U",  "D T qR | BB qR U",  "D D R | BB qR U",   "D D BB | R qR U",
        "D D BB | qL R U",   "D D BB | qL L qR",  "D D BB | L qR qR",  "D D L | BB qR qR",
        "D D T | BB qR qR",  "D D D | CC qR qR",
    };
}

// ---------------------------------------------------------------------------
// Penalty rules
// ---------------------------------------------------------------------------
//
// The prohibited-pair table is read off the propagation cycle: a pair is
// allowed exactly when it occurs in some legal configuration. Pairs are
// classified by the block-relative position of their left site, since the
// neighborhood of a parked data carrier differs at block starts, interiors
// and boundaries. The flag payload of LFlag enters the table (its spare
// state never occurs and is penalized outright); all other payloads are
// transparent to the rules.

/// Refined letters: the nine tags with LFlag split by payload. 10 letters.
inline int refined_letter_1d(Tag1D t, int payload) {
    if (t == Tag1D::LFlag) {
        return payload == 0 ? 8 : 9;
    }
    return static_cast<int>(t);
}

inline const char* refined_letter_name_1d(int letter) {
    static const char* names[10] = {"U", "D", "T", "BB", "CC", "qR", "qL", "R", "L", "L*"};
    return names[letter];
}

struct PatternRule1D {
    int position_class;            // block-relative class of the left site
    bool boundary;                 // the pair straddles a block boundary
    int left;                      // refined letter; -1 = chain-start sentinel rule
    std::vector<int> allowed_right;  // complement = forbidden patterns
};

namespace detail1d {

/// Allowed (left, right) refined-letter pairs per position class, generated
/// once per n' by sweeping the propagation cycle over enough rounds to
/// saturate every block-relative neighborhood.
inline const std::vector<std::vector<std::array<bool, 10>>>& allowed_pairs_1d(int n_prime) {
    static std::map<int, std::vector<std::vector<std::array<bool, 10>>>> cache;
    auto it = cache.find(n_prime);
    if (it != cache.end()) {
        return it->second;
    }
    const int bl = n_prime - 1;
    std::vector<std::vector<std::array<bool, 10>>> allowed(
        bl, std::vector<std::array<bool, 10>>(10, std::array<bool, 10>{}));
    for (int rounds : {1, 2, 3, 4, 5}) {
        std::vector<WireRole> roles(n_prime, WireRole::Witness);
        roles[n_prime - 1] = WireRole::Output;
        LayeredCircuit c = normalize({}, roles);
        c.layers.assign(rounds, ComputationalLayer::identities(n_prime));
        for (const auto& cfg : full_trace_1d(c, std::vector<int>(n_prime, 0))) {
            const auto& sites = cfg.sites;
            const int last = cfg.geom.sites() - 1;
            allowed[bl - 1][refined_letter_1d(Tag1D::Dead, 0)]
                   [refined_letter_1d(sites[0].tag, sites[0].payload)] = true;
            allowed[bl - 1][refined_letter_1d(sites[last].tag, sites[last].payload)]
                   [refined_letter_1d(Tag1D::Unborn, 0)] = true;
            for (int j = 0; j < last; ++j) {
                allowed[j % bl][refined_letter_1d(sites[j].tag, sites[j].payload)]
                       [refined_letter_1d(sites[j + 1].tag, sites[j + 1].payload)] = true;
            }
        }
    }
    return cache.emplace(n_prime, std::move(allowed)).first->second;
}

inline std::vector<int> states_of_letter_1d(int letter) {
    std::vector<int> out;
    for (const auto& s : site_basis_1d()) {
        if (refined_letter_1d(s.tag, std::max(0, s.payload)) == letter) {
            out.push_back(site_index_1d(s.tag, std::max(0, s.payload)));
        }
    }
    return out;
}

}  // namespace detail1d

/// The prohibited-pattern list in allowed-complement form.
inline std::vector<PatternRule1D> penalty_rules_1d(int n_prime) {
    const auto& allowed = detail1d::allowed_pairs_1d(n_prime);
    std::vector<PatternRule1D> rules;
    const int bl = n_prime - 1;
    for (int cls = 0; cls < bl; ++cls) {
        for (int l = 0; l < 10; ++l) {
            PatternRule1D r;
            r.position_class = cls;
            r.boundary = cls == bl - 1;
            r.left = l;
            for (int x = 0; x < 10; ++x) {
                if (allowed[cls][l][x]) {
                    r.allowed_right.push_back(x);
                }
            }
            rules.push_back(std::move(r));
        }
    }
    return rules;
}

/// Number of prohibited-pattern matches, including the chain-end sentinels
/// (dead before the first site, unborn after the last, both boundary-marked).
inline int penalty_energy_1d(const ChainConfiguration& cfg) {
    const auto& allowed = detail1d::allowed_pairs_1d(cfg.geom.n_prime);
    const int bl = cfg.geom.block_len();
    const int last = cfg.geom.sites() - 1;
    int hits = 0;
    auto letter = [](const Site1D& s) { return refined_letter_1d(s.tag, s.payload); };
    if (!allowed[bl - 1][refined_letter_1d(Tag1D::Dead, 0)][letter(cfg.sites[0])]) {
        ++hits;
    }
    if (!allowed[bl - 1][letter(cfg.sites[last])][refined_letter_1d(Tag1D::Unborn, 0)]) {
        ++hits;
    }
    for (int j = 0; j < last; ++j) {
        if (!allowed[j % bl][letter(cfg.sites[j])][letter(cfg.sites[j + 1])]) {
            ++hits;
        }
    }
    return hits;
}

/// Penalty term as local blocks: a diagonal projector per placement summing
/// every prohibited pattern there.
inline std::vector<LocalTerm> build_penalty_1d(int n_prime, int rounds) {
    const ChainGeom g{n_prime, rounds};
    const auto& allowed = detail1d::allowed_pairs_1d(n_prime);
    const int bl = g.block_len();
    std::vector<LocalTerm> terms;
    // Chain-start sentinel: forbidden first letters.
    {
        LocalTerm lt = LocalTerm::zero({0}, kSiteDim1D, "penalty:start");
        for (int x = 0; x < 10; ++x) {
            if (!allowed[bl - 1][refined_letter_1d(Tag1D::Dead, 0)][x]) {
                for (int s : detail1d::states_of_letter_1d(x)) {
                    lt.at(s, s) += 1.0;
                }
            }
        }
        terms.push_back(std::move(lt));
    }
    {
        LocalTerm lt = LocalTerm::zero({g.sites() - 1}, kSiteDim1D, "penalty:end");
        for (int x = 0; x < 10; ++x) {
            if (!allowed[bl - 1][x][refined_letter_1d(Tag1D::Unborn, 0)]) {
                for (int s : detail1d::states_of_letter_1d(x)) {
                    lt.at(s, s) += 1.0;
                }
            }
        }
        terms.push_back(std::move(lt));
    }
    for (int j = 0; j + 1 < g.sites(); ++j) {
        LocalTerm lt = LocalTerm::zero({j, j + 1}, kSiteDim1D, "penalty:pair" + std::to_string(j));
        for (int l = 0; l < 10; ++l) {
            for (int r = 0; r < 10; ++r) {
                if (allowed[j % bl][l][r]) {
                    continue;
                }
                for (int a : detail1d::states_of_letter_1d(l)) {
                    for (int b : detail1d::states_of_letter_1d(r)) {
                        const int loc = a + kSiteDim1D * b;
                        lt.at(loc, loc) += 1.0;
                    }
                }
            }
        }
        terms.push_back(std::move(lt));
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Illegality classification
// ---------------------------------------------------------------------------

enum class IllegalKind { Legal, LocallyCheckable, LengthViolating };

/// LocallyCheckable when a prohibited pattern matches; otherwise the
/// configuration is a dead-prefix / data-string / unborn-suffix chain and is
/// Legal exactly when the string carries a single active site with the legal
/// site count and data-carrier multiplicity; everything else violates the
/// qudit-string length accounting.
inline IllegalKind classify_illegal(const ChainConfiguration& cfg) {
    if (penalty_energy_1d(cfg) > 0) {
        return IllegalKind::LocallyCheckable;
    }
    const int n = cfg.geom.n_prime;
    const int sites = cfg.geom.sites();
    int d = 0;
    while (d < sites && cfg.sites[d].tag == Tag1D::Dead) {
        ++d;
    }
    int u = sites;
    while (u > d && cfg.sites[u - 1].tag == Tag1D::Unborn) {
        --u;
    }
    int actives = 0, carriers = 0;
    Tag1D active = Tag1D::Unborn;
    for (int j = d; j < u; ++j) {
        const Tag1D t = cfg.sites[j].tag;
        if (t == Tag1D::Dead || t == Tag1D::Unborn) {
            return IllegalKind::LengthViolating;  // broken string interior
        }
        if (is_active_1d(t)) {
            ++actives;
            active = t;
        }
        if (t == Tag1D::BB) {
            ++carriers;
        }
    }
    const int len = u - d;
    const bool legal =
        actives == 1 &&
        ((active == Tag1D::CC && len == n - 1 && carriers == 0) ||
         (active == Tag1D::RFlag && len == n - 1 && carriers == 1) ||
         ((active == Tag1D::LFlag || active == Tag1D::Turn) && len == n && carriers == 1));
    return legal ? IllegalKind::Legal : IllegalKind::LengthViolating;
}

// ---------------------------------------------------------------------------
// Hamiltonian terms
// ---------------------------------------------------------------------------

/// Propagation term: per rule and placement, half the projectors onto the
/// rule's source and target pattern spaces minus the signed move.
inline std::vector<LocalTerm> build_prop_1d(const LayeredCircuit& c) {
    c.validate();
    if (!c.identity_slots_only()) {
        throw std::invalid_argument(
            "build_prop_1d: the line construction requires identity 1-qubit slots");
    }
    const ChainGeom g{c.n_prime, c.rounds()};
    std::vector<LocalTerm> terms;
    auto add_term = [&](std::vector<int> sites, const std::vector<std::pair<int, int>>& moves,
                        const std::string& label) {
        LocalTerm lt = LocalTerm::zero(std::move(sites), kSiteDim1D, label);
        for (const auto& [src, tgt] : moves) {
            lt.at(src, src) += 0.5;
            lt.at(tgt, tgt) += 0.5;
            lt.at(tgt, src) += -0.5;
            lt.at(src, tgt) += -0.5;
        }
        terms.push_back(std::move(lt));
    };
    for (const auto& rule : transition_rules_1d()) {
        if (rule.where == TransitionRule1D::Where::VirtualLeft) {
            add_term({0}, detail1d::virtual_left_turn_moves(), "prop:turn@start");
            continue;
        }
        for (int j = 0; j + 1 < g.sites(); ++j) {
            const bool b = g.boundary_after(j);
            if (rule.where == TransitionRule1D::Where::NonBoundary && b) {
                continue;
            }
            if (rule.where == TransitionRule1D::Where::Boundary && !b) {
                continue;
            }
            const std::vector<std::pair<int, int>> moves =
                rule.kind == RuleKind::GateApplication
                    ? detail1d::rule_moves(rule.kind, detail1d::gate_at(c, g, j))
                    : detail1d::cached_rule_moves(rule.kind);
            add_term({j, j + 1}, moves,
                     std::string("prop:rule") + std::to_string(rule.rule_number) + "@" + std::to_string(j));
        }
    }
    return terms;
}

/// Input checks on the first block. The gate-flag site is checked directly;
/// later sites are checked against their declared wire when the gate flag
/// sits immediately to their left, which happens exactly once, before any
/// gate has touched them.
inline std::vector<LocalTerm> build_init_1d(const LayeredCircuit& c,
                                            const std::vector<int>& input_bits = {}) {
    c.validate();
    std::vector<int> inputs;
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Input0 || c.roles[w - 1] == WireRole::Input1) {
            inputs.push_back(w);
        }
    }
    if (!input_bits.empty() && input_bits.size() != inputs.size()) {
        throw std::invalid_argument("build_init_1d: input override length mismatch");
    }
    auto wanted = [&](int w) -> std::optional<int> {
        const WireRole role = c.roles[w - 1];
        if (role == WireRole::Witness || role == WireRole::Coin) {
            return std::nullopt;
        }
        int v = role == WireRole::Input1 ? 1 : 0;
        if (!input_bits.empty() && (role == WireRole::Input0 || role == WireRole::Input1)) {
            const auto it = std::find(inputs.begin(), inputs.end(), w);
            v = input_bits[it - inputs.begin()] & 1;
        }
        return v;
    };
    std::vector<LocalTerm> terms;
    {
        LocalTerm lt = LocalTerm::zero({0}, kSiteDim1D, "init:flag");
        bool used = false;
        for (int half = 0; half < 2; ++half) {
            const int w = 1 + half;
            if (c.roles[w - 1] == WireRole::Coin) {
                used = true;
                for (int other = 0; other < 2; ++other) {
                    const int p0 = half == 0 ? other : (other << 1);
                    const int p1 = half == 0 ? (2 | other) : ((other << 1) | 1);
                    const int a = site_index_1d(Tag1D::CC, p0);
                    const int b = site_index_1d(Tag1D::CC, p1);
                    lt.at(a, a) += 0.5;
                    lt.at(b, b) += 0.5;
                    lt.at(a, b) += -0.5;
                    lt.at(b, a) += -0.5;
                }
            } else if (auto v = wanted(w)) {
                used = true;
                for (int p = 0; p < 4; ++p) {
                    const int bit = half == 0 ? (p >> 1) : (p & 1);
                    if (bit != *v) {
                        const int a = site_index_1d(Tag1D::CC, p);
                        lt.at(a, a) += 1.0;
                    }
                }
            }
        }
        if (used) {
            terms.push_back(std::move(lt));
        }
    }
    for (int j = 0; j + 2 < c.n_prime; ++j) {
        const int w = j + 3;  // wire held by site j+1 until the flag passes
        const WireRole role = c.roles[w - 1];
        if (role == WireRole::Witness) {
            continue;
        }
        LocalTerm lt = LocalTerm::zero({j, j + 1}, kSiteDim1D, "init:wire" + std::to_string(w));
        for (int p = 0; p < 4; ++p) {
            const int cc = site_index_1d(Tag1D::CC, p);
            if (role == WireRole::Coin) {
                const int a = cc + kSiteDim1D * site_index_1d(Tag1D::QRight, 0);
                const int b = cc + kSiteDim1D * site_index_1d(Tag1D::QRight, 1);
                lt.at(a, a) += 0.5;
                lt.at(b, b) += 0.5;
                lt.at(a, b) += -0.5;
                lt.at(b, a) += -0.5;
            } else {
                const int v = *wanted(w);
                const int badp = site_index_1d(Tag1D::QRight, 1 - v);
                const int a = cc + kSiteDim1D * badp;
                lt.at(a, a) += 1.0;
            }
        }
        terms.push_back(std::move(lt));
    }
    return terms;
}

/// Projector onto rejecting final states: the gate flag at the last site with
/// the output payload bit reading 0.
inline std::vector<LocalTerm> build_final_1d(const LayeredCircuit& c) {
    c.validate();
    const ChainGeom g{c.n_prime, c.rounds()};
    const int out = c.output_wire();
    if (out != c.n_prime - 1 && out != c.n_prime) {
        throw std::invalid_argument(
            "build_final_1d: the output wire must be one of the last two wires");
    }
    LocalTerm lt = LocalTerm::zero({g.sites() - 1}, kSiteDim1D, "final");
    for (int p = 0; p < 4; ++p) {
        const int bit = out == c.n_prime - 1 ? (p >> 1) : (p & 1);
        if (bit == 0) {
            const int a = site_index_1d(Tag1D::CC, p);
            lt.at(a, a) += 1.0;
        }
    }
    return {lt};
}

/// History state over the encoded trace for phi0 given on the n'-qubit basis.
inline SparseVec history_state_1d(const LayeredCircuit& c, const std::vector<double>& phi0) {
    const index_t nx = INT64_C(1) << c.n_prime;
    if (static_cast<index_t>(phi0.size()) != nx) {
        throw std::invalid_argument("history_state_1d: phi0 must have dimension 2^n'");
    }
    SparseVec out;
    std::optional<double> norm;
    for (index_t xv = 0; xv < nx; ++xv) {
        if (phi0[xv] == 0.0) {
            continue;
        }
        std::vector<int> bits(c.n_prime);
        for (int w = 0; w < c.n_prime; ++w) {
            bits[w] = static_cast<int>((xv >> w) & 1);
        }
        const auto trace = full_trace_1d(c, bits);
        if (!norm) {
            norm = 1.0 / std::sqrt(static_cast<double>(trace.size()));
        }
        for (const auto& cfg : trace) {
            out.push_back({encode_chain(cfg), phi0[xv] * *norm});
        }
    }
    sparsevec_canonicalize(out);
    return out;
}

/// Sorted basis indices of every encoded trace configuration over all
/// witness and coin assignments.
inline std::vector<index_t> trace_sector_basis_1d(const LayeredCircuit& c) {
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
        for (const auto& cfg : full_trace_1d(c, bits)) {
            out.push_back(encode_chain(cfg));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// The four named terms of the line Hamiltonian. Assembly weights follow
/// H = init + prop_weight * prop + penalty + delta * final with prop_weight
/// defaulting to one.
struct HamiltonianBundle1D {
    ChainGeom geom;
    BasisDescriptor basis;
    int T = 0;  // trace length (number of configurations)
    double prop_weight = 1.0;
    double final_weight = 1.0;
    std::vector<LocalTerm> init, prop, penalty, fin;

    std::vector<std::pair<std::string, const std::vector<LocalTerm>*>> named_terms() const {
        return {{"init", &init}, {"prop", &prop}, {"penalty", &penalty}, {"final", &fin}};
    }
};

inline HamiltonianBundle1D build_full_1d(const LayeredCircuit& c, const std::vector<int>& input_bits = {},
                                         double delta = 1.0) {
    HamiltonianBundle1D b;
    b.geom = ChainGeom{c.n_prime, c.rounds()};
    b.basis = b.geom.basis();
    b.T = trace_length_formula_1d(c.n_prime, c.rounds());
    b.final_weight = delta;
    b.init = build_init_1d(c, input_bits);
    b.prop = build_prop_1d(c);
    b.penalty = build_penalty_1d(c.n_prime, c.rounds());
    b.fin = build_final_1d(c);
    return b;
}

inline SparseOperator assemble_full_1d(const HamiltonianBundle1D& b, index_t cap = 10000000) {
    if (checked_pow(kSiteDim1D, b.basis.site_count) < 0 || b.basis.dim() > cap) {
        throw std::invalid_argument("assemble_full_1d: basis size exceeds the configured cap");
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
    weighted(b.penalty, 1.0);
    weighted(b.fin, b.final_weight);
    return assemble(all, b.basis);
}

}  // namespace stoqham
