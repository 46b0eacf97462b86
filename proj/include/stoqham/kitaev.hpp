#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stoqham/circuit.hpp"
#include "stoqham/sparse.hpp"

namespace stoqham {

/// Clock-register circuit-to-Hamiltonian mapping. The clock is stored as a
/// plain index 0..T rather than unary qubits: this module is an algebraic
/// cross-validation oracle, not a locality demonstration.
///
/// Basis index = x + 2^n' * t, with wire w on bit w-1 of x.
struct KitaevBundle {
    SparseOperator h_in;
    SparseOperator h_prop;
    SparseOperator h_out;
    int T = 0;
    int n_prime = 0;

    index_t dim() const { return h_prop.dim(); }
};

namespace detail {

/// Expands the layered circuit into its full gate sequence: each
/// computational layer's n' slots followed by the n'/2 identity-layer gates.
inline std::vector<Gate> kitaev_gate_sequence(const LayeredCircuit& c) {
    std::vector<Gate> seq;
    for (const auto& layer : c.layers) {
        for (const auto& g : layer.gates) {
            seq.push_back(g);
        }
        for (int i = 1; i <= c.n_prime / 2; ++i) {
            seq.push_back(Gate::id2(2 * i - 1, 2 * i));
        }
    }
    return seq;
}

inline std::uint64_t apply_gate_bits(const Gate& g, std::uint64_t x) {
    switch (g.kind) {
        case GateKind::Toffoli: {
            const std::uint64_t c0 = (x >> (g.wires[0] - 1)) & 1;
            const std::uint64_t c1 = (x >> (g.wires[1] - 1)) & 1;
            return x ^ ((c0 & c1) << (g.wires[2] - 1));
        }
        case GateKind::X:
            return x ^ (UINT64_C(1) << (g.wires[0] - 1));
        default:
            return x;
    }
}

}  // namespace detail

/// Propagation term for an explicit gate sequence: for each step the two
/// clock projectors minus the signed gate permutation between them.
inline SparseOperator kitaev_prop(const std::vector<Gate>& seq, int n_prime) {
    const int T = static_cast<int>(seq.size());
    const index_t nx = INT64_C(1) << n_prime;
    SparseOperator h(nx * (T + 1));
    for (int t = 1; t <= T; ++t) {
        const Gate& g = seq[t - 1];
        for (index_t x = 0; x < nx; ++x) {
            const index_t from = x + nx * static_cast<index_t>(t - 1);
            const index_t to_x = static_cast<index_t>(detail::apply_gate_bits(g, static_cast<std::uint64_t>(x)));
            const index_t to = to_x + nx * static_cast<index_t>(t);
            h.add(from, from, 0.5);
            h.add(x + nx * static_cast<index_t>(t), x + nx * static_cast<index_t>(t), 0.5);
            h.add_sym(to, from, -0.5);
        }
    }
    h.canonicalize();
    return h;
}

/// History state for an explicit gate sequence.
inline std::vector<double> history_state_seq(const std::vector<Gate>& seq, int n_prime,
                                             const std::vector<double>& phi0) {
    const int T = static_cast<int>(seq.size());
    const index_t nx = INT64_C(1) << n_prime;
    if (static_cast<index_t>(phi0.size()) != nx) {
        throw std::invalid_argument("history_state_seq: phi0 must have dimension 2^n'");
    }
    std::vector<double> out(nx * (T + 1), 0.0);
    std::vector<double> cur = phi0;
    const double norm = 1.0 / std::sqrt(static_cast<double>(T + 1));
    for (int t = 0; t <= T; ++t) {
        if (t > 0) {
            std::vector<double> next(nx, 0.0);
            for (index_t x = 0; x < nx; ++x) {
                next[detail::apply_gate_bits(seq[t - 1], static_cast<std::uint64_t>(x))] += cur[x];
            }
            cur = std::move(next);
        }
        for (index_t x = 0; x < nx; ++x) {
            out[x + nx * static_cast<index_t>(t)] = norm * cur[x];
        }
    }
    return out;
}

/// Builds the three named terms. Input and ancilla checks project at t=0;
/// coins are kept in the plus state by a rank-one defect term; the output is
/// checked at t=T. Optional input_bits override the bits carried by the
/// input0/input1 roles, in ascending wire order.
inline KitaevBundle build_kitaev(const LayeredCircuit& c, const std::vector<int>& input_bits = {}) {
    c.validate();
    const auto seq = detail::kitaev_gate_sequence(c);
    const int T = static_cast<int>(seq.size());
    const index_t nx = INT64_C(1) << c.n_prime;
    const index_t dim = nx * (T + 1);
    KitaevBundle b;
    b.T = T;
    b.n_prime = c.n_prime;
    b.h_in = SparseOperator(dim);
    b.h_prop = SparseOperator(dim);
    b.h_out = SparseOperator(dim);

    std::vector<int> inputs;
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Input0 || c.roles[w - 1] == WireRole::Input1) {
            inputs.push_back(w);
        }
    }
    if (!input_bits.empty() && input_bits.size() != inputs.size()) {
        throw std::invalid_argument("build_kitaev: input override length mismatch");
    }

    for (index_t x = 0; x < nx; ++x) {
        double pin = 0.0;
        for (int w = 1; w <= c.n_prime; ++w) {
            const int bit = static_cast<int>((x >> (w - 1)) & 1);
            switch (c.roles[w - 1]) {
                case WireRole::Input0:
                case WireRole::Input1: {
                    int want = c.roles[w - 1] == WireRole::Input1 ? 1 : 0;
                    if (!input_bits.empty()) {
                        const auto it = std::find(inputs.begin(), inputs.end(), w);
                        want = input_bits[it - inputs.begin()] & 1;
                    }
                    pin += bit != want ? 1.0 : 0.0;
                    break;
                }
                case WireRole::Ancilla:
                case WireRole::Output:
                    pin += bit != 0 ? 1.0 : 0.0;
                    break;
                case WireRole::Coin:
                    pin += 0.5;  // diagonal part of 1 - |+><+| on this wire
                    break;
                case WireRole::Witness:
                    break;
            }
        }
        if (pin != 0.0) {
            b.h_in.add(x, x, pin);
        }
        for (int w = 1; w <= c.n_prime; ++w) {
            if (c.roles[w - 1] == WireRole::Coin) {
                const index_t flipped = x ^ (INT64_C(1) << (w - 1));
                if (flipped > x) {
                    b.h_in.add_sym(x, flipped, -0.5);
                }
            }
        }
        const int out = c.output_wire();
        if (((x >> (out - 1)) & 1) == 0) {
            b.h_out.add(x + nx * static_cast<index_t>(T), x + nx * static_cast<index_t>(T), 1.0);
        }
    }

    b.h_prop = kitaev_prop(seq, c.n_prime);
    b.h_in.canonicalize();
    b.h_out.canonicalize();
    return b;
}

/// Initial computational state for a basis witness: inputs and constants from
/// the roles, coins in the uniform plus state.
inline std::vector<double> kitaev_initial_state(const LayeredCircuit& c, const std::vector<int>& witness,
                                                const std::vector<int>& input_bits = {}) {
    const auto coins = c.wires_with_role(WireRole::Coin);
    const auto wits = c.wires_with_role(WireRole::Witness);
    if (witness.size() != wits.size()) {
        throw std::invalid_argument("kitaev_initial_state: witness length mismatch");
    }
    std::vector<int> inputs;
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Input0 || c.roles[w - 1] == WireRole::Input1) {
            inputs.push_back(w);
        }
    }
    std::uint64_t base = 0;
    for (int w = 1; w <= c.n_prime; ++w) {
        if (c.roles[w - 1] == WireRole::Input1) {
            base |= UINT64_C(1) << (w - 1);
        }
    }
    if (!input_bits.empty()) {
        if (input_bits.size() != inputs.size()) {
            throw std::invalid_argument("kitaev_initial_state: input override length mismatch");
        }
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const std::uint64_t m = UINT64_C(1) << (inputs[i] - 1);
            base = (base & ~m) | (input_bits[i] ? m : 0);
        }
    }
    for (std::size_t i = 0; i < wits.size(); ++i) {
        if (witness[i] & 1) {
            base |= UINT64_C(1) << (wits[i] - 1);
        }
    }
    const index_t nx = INT64_C(1) << c.n_prime;
    std::vector<double> phi(nx, 0.0);
    const int k = static_cast<int>(coins.size());
    const double amp = std::pow(0.5, 0.5 * k);
    for (std::uint64_t a = 0; a < (UINT64_C(1) << k); ++a) {
        std::uint64_t x = base;
        for (int i = 0; i < k; ++i) {
            if ((a >> i) & 1) {
                x |= UINT64_C(1) << (coins[i] - 1);
            }
        }
        phi[x] += amp;
    }
    return phi;
}

/// The uniform superposition of computation snapshots entangled with the
/// clock index: sum_t (U_t ... U_1 phi0) (x) |t>, normalized.
inline std::vector<double> history_state(const LayeredCircuit& c, const std::vector<double>& phi0) {
    return history_state_seq(detail::kitaev_gate_sequence(c), c.n_prime, phi0);
}

/// <v|H|v> for a dense vector.
inline double expectation(const SparseOperator& op, const std::vector<double>& v) {
    if (static_cast<index_t>(v.size()) != op.dim()) {
        throw std::invalid_argument("expectation: dimension mismatch");
    }
    double e = 0.0;
    for (const auto& t : op.triples()) {
        e += v[t.row] * t.value * v[t.col];
    }
    return e;
}

}  // namespace stoqham
