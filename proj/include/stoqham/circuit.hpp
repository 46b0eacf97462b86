#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stoqham {

// ---------------------------------------------------------------------------
// Gates and layered circuits
// ---------------------------------------------------------------------------

enum class GateKind { Toffoli, X, Identity1, Identity2, Identity3 };

inline int gate_arity(GateKind k) {
    switch (k) {
        case GateKind::Toffoli:
        case GateKind::Identity3:
            return 3;
        case GateKind::Identity2:
            return 2;
        default:
            return 1;
    }
}

/// A classical reversible gate. Wires are 1-based and pairwise distinct.
/// For Toffoli, wires[0] and wires[1] are controls and wires[2] the target.
struct Gate {
    GateKind kind = GateKind::Identity1;
    std::array<int, 3> wires{0, 0, 0};

    int arity() const { return gate_arity(kind); }

    static Gate toffoli(int c0, int c1, int target) { return {GateKind::Toffoli, {c0, c1, target}}; }
    static Gate x(int w) { return {GateKind::X, {w, 0, 0}}; }
    static Gate id1(int w) { return {GateKind::Identity1, {w, 0, 0}}; }
    static Gate id2(int a, int b) { return {GateKind::Identity2, {a, b, 0}}; }
    static Gate id3(int a, int b, int c) { return {GateKind::Identity3, {a, b, c}}; }

    /// Applies the gate's truth table to a bit assignment (1-based wires).
    void apply(std::vector<int>& bits) const {
        switch (kind) {
            case GateKind::Toffoli:
                bits[wires[2] - 1] ^= bits[wires[0] - 1] & bits[wires[1] - 1];
                break;
            case GateKind::X:
                bits[wires[0] - 1] ^= 1;
                break;
            default:
                break;
        }
    }
};

enum class WireRole { Input0, Input1, Witness, Coin, Ancilla, Output };

inline bool role_fixes_zero(WireRole r) {
    return r == WireRole::Input0 || r == WireRole::Ancilla || r == WireRole::Output;
}

/// One computational layer: slot 1 holds a 1-qubit gate on wire 1, slot 2 a
/// 2-qubit gate on wires (1,2), and slot m >= 3 a 3-qubit gate on wires
/// (m-2, m-1, m). Non-identity gates are only ever Toffolis, except that the
/// 1-qubit slot may carry an X.
struct ComputationalLayer {
    std::vector<Gate> gates;  // exactly n' gates, slot order

    static ComputationalLayer identities(int n_prime) {
        ComputationalLayer l;
        l.gates.push_back(Gate::id1(1));
        if (n_prime >= 2) {
            l.gates.push_back(Gate::id2(1, 2));
        }
        for (int m = 3; m <= n_prime; ++m) {
            l.gates.push_back(Gate::id3(m - 2, m - 1, m));
        }
        return l;
    }
};

/// A normalized verification circuit: computational layers alternating with
/// implicit identity layers (n'/2 two-qubit identities, gate i on wires
/// 2i-1, 2i). The identity layers carry no data and are reconstructed from
/// n_prime where a builder needs them.
struct LayeredCircuit {
    int n_prime = 0;
    std::vector<ComputationalLayer> layers;
    std::vector<WireRole> roles;  // size n_prime

    int rounds() const { return static_cast<int>(layers.size()); }

    /// Total gate count including the identity layers (used by the clock-index
    /// construction): R * (n' + n'/2).
    int gate_count() const { return rounds() * (n_prime + n_prime / 2); }

    std::vector<int> wires_with_role(WireRole r) const {
        std::vector<int> out;
        for (int w = 1; w <= n_prime; ++w) {
            if (roles[w - 1] == r) {
                out.push_back(w);
            }
        }
        return out;
    }

    int output_wire() const {
        const auto o = wires_with_role(WireRole::Output);
        if (o.size() != 1) {
            throw std::logic_error("LayeredCircuit: exactly one output wire required");
        }
        return o[0];
    }

    void validate() const {
        if (n_prime <= 0 || n_prime % 2 != 0) {
            throw std::invalid_argument("LayeredCircuit: n' must be even and positive");
        }
        if (static_cast<int>(roles.size()) != n_prime) {
            throw std::invalid_argument("LayeredCircuit: roles must cover all wires");
        }
        int outputs = 0;
        for (auto r : roles) {
            outputs += r == WireRole::Output ? 1 : 0;
        }
        if (outputs != 1) {
            throw std::invalid_argument("LayeredCircuit: exactly one output wire required");
        }
        for (const auto& layer : layers) {
            if (static_cast<int>(layer.gates.size()) != n_prime) {
                throw std::invalid_argument("LayeredCircuit: computational layer must hold n' gates");
            }
            for (int m = 1; m <= n_prime; ++m) {
                const Gate& g = layer.gates[m - 1];
                if (m == 1) {
                    if (g.arity() != 1 || g.wires[0] != 1) {
                        throw std::invalid_argument("LayeredCircuit: slot 1 must be a 1-qubit gate on wire 1");
                    }
                } else if (m == 2) {
                    if (g.kind != GateKind::Identity2 || g.wires[0] != 1 || g.wires[1] != 2) {
                        throw std::invalid_argument("LayeredCircuit: slot 2 must be the identity on wires 1,2");
                    }
                } else {
                    if (g.arity() != 3) {
                        throw std::invalid_argument("LayeredCircuit: slots 3..n' must hold 3-qubit gates");
                    }
                    std::array<int, 3> ws = g.wires;
                    std::sort(ws.begin(), ws.end());
                    if (ws[0] != m - 2 || ws[1] != m - 1 || ws[2] != m) {
                        throw std::invalid_argument(
                            "LayeredCircuit: slot " + std::to_string(m) + " must act on wires " +
                            std::to_string(m - 2) + "," + std::to_string(m - 1) + "," + std::to_string(m));
                    }
                    if (g.wires[0] == g.wires[1] || g.wires[1] == g.wires[2] || g.wires[0] == g.wires[2]) {
                        throw std::invalid_argument("LayeredCircuit: gate wires must be distinct");
                    }
                }
            }
        }
    }

    /// True when every 1- and 2-qubit slot is an identity (the convention the
    /// line construction requires).
    bool identity_slots_only() const {
        for (const auto& layer : layers) {
            if (layer.gates[0].kind != GateKind::Identity1) {
                return false;
            }
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Applies every gate's classical truth table in layer order. The implicit
/// identity layers do not move data.
inline std::vector<int> simulate(const LayeredCircuit& c, const std::vector<int>& x) {
    if (static_cast<int>(x.size()) != c.n_prime) {
        throw std::invalid_argument("simulate: input length must equal n'");
    }
    std::vector<int> bits = x;
    for (const auto& layer : c.layers) {
        for (const auto& g : layer.gates) {
            g.apply(bits);
        }
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Normalization of raw gate lists
// ---------------------------------------------------------------------------

/// Lowers a list of Toffoli/X gates into the layered form, one non-identity
/// gate per computational layer.
///
/// Toffolis must already act on consecutive wire triples (any control/target
/// order within the triple). An X on wire 1 is kept in the 1-qubit slot; an X
/// on another wire is lowered to a Toffoli whose controls read an adjacent
/// pair of constant-one input wires, and is rejected when no such pair exists.
inline LayeredCircuit normalize(std::vector<Gate> raw, std::vector<WireRole> roles) {
    const int n = static_cast<int>(roles.size());
    if (n == 0) {
        throw std::invalid_argument("normalize: empty circuit");
    }
    for (const auto& g : raw) {
        for (int i = 0; i < g.arity(); ++i) {
            if (g.wires[i] < 1 || g.wires[i] > n) {
                throw std::invalid_argument("normalize: gate wire out of range");
            }
        }
    }
    LayeredCircuit c;
    c.roles = std::move(roles);
    c.n_prime = n;
    if (n % 2 != 0) {
        c.roles.push_back(WireRole::Ancilla);  // dummy padding wire, never touched
        c.n_prime = n + 1;
    }

    auto const_one = [&](int w) {
        return w >= 1 && w <= c.n_prime && c.roles[w - 1] == WireRole::Input1;
    };

    for (const auto& g : raw) {
        switch (g.kind) {
            case GateKind::Identity1:
            case GateKind::Identity2:
            case GateKind::Identity3:
                continue;  // no-ops carry no data
            case GateKind::Toffoli: {
                std::array<int, 3> ws = g.wires;
                std::sort(ws.begin(), ws.end());
                if (ws[1] != ws[0] + 1 || ws[2] != ws[1] + 1 || ws[0] == ws[1]) {
                    throw std::invalid_argument(
                        "normalize: Toffoli gates must act on consecutive wire triples");
                }
                ComputationalLayer layer = ComputationalLayer::identities(c.n_prime);
                layer.gates[ws[2] - 1] = g;  // slot index = highest wire of the triple
                c.layers.push_back(std::move(layer));
                break;
            }
            case GateKind::X: {
                const int w = g.wires[0];
                ComputationalLayer layer = ComputationalLayer::identities(c.n_prime);
                if (w == 1) {
                    layer.gates[0] = g;  // 1-qubit slot
                } else if (const_one(w + 1) && const_one(w + 2)) {
                    layer.gates[w + 1] = Gate::toffoli(w + 1, w + 2, w);
                } else if (const_one(w - 1) && const_one(w - 2)) {
                    layer.gates[w - 1] = Gate::toffoli(w - 2, w - 1, w);
                } else {
                    throw std::invalid_argument(
                        "normalize: X on wire " + std::to_string(w) +
                        " needs an adjacent pair of constant-one input wires");
                }
                c.layers.push_back(std::move(layer));
                break;
            }
        }
    }
    if (c.layers.empty()) {
        c.layers.push_back(ComputationalLayer::identities(c.n_prime));
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Acceptance probability
// ---------------------------------------------------------------------------

struct AcceptanceReport {
    std::int64_t accepting = 0;
    std::int64_t total = 0;
    double p_accept = 0.0;
    bool is_estimate = false;
    double ci_halfwidth = 0.0;  // 95% interval when sampled
    std::vector<int> best_witness;
};

/// Exact enumeration over all coin assignments, counting runs where the
/// output wire ends in 1. Beyond the enumeration cap the probability is
/// sampled with a fixed seed and flagged as an estimate.
inline AcceptanceReport acceptance_probability(const LayeredCircuit& c, const std::vector<int>& witness,
                                               int coin_cap_log2 = 20, std::uint64_t seed = 1) {
    c.validate();
    const auto coins = c.wires_with_role(WireRole::Coin);
    const auto witnesses = c.wires_with_role(WireRole::Witness);
    if (witness.size() != witnesses.size()) {
        throw std::invalid_argument("acceptance_probability: witness length mismatch");
    }
    const int out = c.output_wire();

    std::vector<int> base(c.n_prime, 0);
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Input1) {
            base[w - 1] = 1;
        }
    }
    for (std::size_t i = 0; i < witnesses.size(); ++i) {
        base[witnesses[i] - 1] = witness[i] & 1;
    }

    AcceptanceReport rep;
    rep.best_witness = witness;
    const int k = static_cast<int>(coins.size());
    auto run = [&](std::uint64_t coin_bits) {
        std::vector<int> bits = base;
        for (int i = 0; i < k; ++i) {
            bits[coins[i] - 1] = static_cast<int>((coin_bits >> i) & 1);
        }
        return simulate(c, bits)[out - 1] == 1;
    };

    if (k <= coin_cap_log2) {
        const std::int64_t total = INT64_C(1) << k;
        for (std::int64_t a = 0; a < total; ++a) {
            rep.accepting += run(static_cast<std::uint64_t>(a)) ? 1 : 0;
        }
        rep.total = total;
        rep.p_accept = static_cast<double>(rep.accepting) / static_cast<double>(total);
        return rep;
    }

    const std::int64_t samples = INT64_C(1) << 20;
    std::mt19937_64 rng(seed);
    for (std::int64_t s = 0; s < samples; ++s) {
        std::uint64_t bits = rng();
        if (k > 64) {
            throw std::invalid_argument("acceptance_probability: more than 64 coin wires unsupported");
        }
        rep.accepting += run(bits) ? 1 : 0;
    }
    rep.total = samples;
    rep.p_accept = static_cast<double>(rep.accepting) / static_cast<double>(samples);
    rep.is_estimate = true;
    rep.ci_halfwidth = 1.96 * std::sqrt(rep.p_accept * (1.0 - rep.p_accept) / static_cast<double>(samples));
    return rep;
}

/// Enumerates witnesses (up to the cap) and returns the report of the best.
inline AcceptanceReport best_acceptance(const LayeredCircuit& c, int witness_cap_log2 = 16,
                                        int coin_cap_log2 = 20) {
    const auto witnesses = c.wires_with_role(WireRole::Witness);
    const int k = static_cast<int>(witnesses.size());
    if (k > witness_cap_log2) {
        throw std::invalid_argument("best_acceptance: witness space exceeds enumeration cap");
    }
    AcceptanceReport best;
    best.p_accept = -1.0;
    for (std::int64_t w = 0; w < (INT64_C(1) << k); ++w) {
        std::vector<int> bits(k);
        for (int i = 0; i < k; ++i) {
            bits[i] = static_cast<int>((w >> i) & 1);
        }
        AcceptanceReport rep = acceptance_probability(c, bits, coin_cap_log2);
        if (rep.p_accept > best.p_accept) {
            best = rep;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Circuit text format
// ---------------------------------------------------------------------------
//
//   QUBITS n
//   ROLE w input0|input1|witness|coin|ancilla|output
//   TOF a b c
//   X a
//   ID a [b [c]]
//
// Wires in files are 0-based; comments start with '#'.

struct CircuitParseError : std::runtime_error {
    CircuitParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line(line) {}
    int line;
};

inline LayeredCircuit parse_circuit(std::istream& in) {
    int n = -1;
    std::vector<std::optional<WireRole>> roles;
    std::vector<Gate> raw;
    std::string line;
    int lineno = 0;
    auto wire = [&](const std::string& tok) {
        int w = -1;
        try {
            w = std::stoi(tok);
        } catch (...) {
            throw CircuitParseError(lineno, "bad wire index '" + tok + "'");
        }
        if (n < 0) {
            throw CircuitParseError(lineno, "QUBITS must come first");
        }
        if (w < 0 || w >= n) {
            throw CircuitParseError(lineno, "wire index " + tok + " out of range");
        }
        return w + 1;  // to 1-based
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        std::istringstream ss(line);
        std::string op;
        if (!(ss >> op)) {
            continue;
        }
        if (op == "QUBITS") {
            if (!(ss >> n) || n <= 0) {
                throw CircuitParseError(lineno, "QUBITS needs a positive count");
            }
            roles.assign(n, std::nullopt);
        } else if (op == "ROLE") {
            std::string wt, rt;
            if (!(ss >> wt >> rt)) {
                throw CircuitParseError(lineno, "ROLE needs a wire and a role");
            }
            const int w = wire(wt);
            WireRole r;
            if (rt == "input0") {
                r = WireRole::Input0;
            } else if (rt == "input1") {
                r = WireRole::Input1;
            } else if (rt == "witness") {
                r = WireRole::Witness;
            } else if (rt == "coin") {
                r = WireRole::Coin;
            } else if (rt == "ancilla") {
                r = WireRole::Ancilla;
            } else if (rt == "output") {
                r = WireRole::Output;
            } else {
                throw CircuitParseError(lineno, "unknown role '" + rt + "'");
            }
            roles[w - 1] = r;
        } else if (op == "TOF") {
            std::string a, b, t;
            if (!(ss >> a >> b >> t)) {
                throw CircuitParseError(lineno, "TOF needs three wires");
            }
            raw.push_back(Gate::toffoli(wire(a), wire(b), wire(t)));
        } else if (op == "X") {
            std::string a;
            if (!(ss >> a)) {
                throw CircuitParseError(lineno, "X needs one wire");
            }
            raw.push_back(Gate::x(wire(a)));
        } else if (op == "ID") {
            std::string a, b, t;
            if (!(ss >> a)) {
                throw CircuitParseError(lineno, "ID needs at least one wire");
            }
            if (ss >> b) {
                if (ss >> t) {
                    raw.push_back(Gate::id3(wire(a), wire(b), wire(t)));
                } else {
                    raw.push_back(Gate::id2(wire(a), wire(b)));
                }
            } else {
                raw.push_back(Gate::id1(wire(a)));
            }
        } else {
            throw CircuitParseError(lineno, "unknown directive '" + op + "'");
        }
        std::string rest;
        if (ss >> rest) {
            throw CircuitParseError(lineno, "trailing tokens after '" + op + "'");
        }
    }
    if (n < 0) {
        throw CircuitParseError(lineno, "missing QUBITS header");
    }
    std::vector<WireRole> final_roles(n);
    for (int w = 0; w < n; ++w) {
        if (!roles[w]) {
            throw CircuitParseError(lineno, "wire " + std::to_string(w) + " has no ROLE");
        }
        final_roles[w] = *roles[w];
    }
    try {
        return normalize(std::move(raw), std::move(final_roles));
    } catch (const std::invalid_argument& e) {
        throw CircuitParseError(lineno, e.what());
    }
}

inline LayeredCircuit load_circuit(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_circuit: cannot open " + path);
    }
    return parse_circuit(in);
}

}  // namespace stoqham
