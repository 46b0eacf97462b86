#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoqham/sparse.hpp"

namespace stoqham {

// ---------------------------------------------------------------------------
// Stoquasticity certification
// ---------------------------------------------------------------------------

struct StoqTermVerdict {
    std::string name;
    bool pass = true;
    double worst_offdiag = 0.0;  // most positive off-diagonal entry found
    index_t worst_row = -1;
    index_t worst_col = -1;
};

struct StoqReport {
    std::vector<StoqTermVerdict> terms;
    double tolerance = 1e-12;

    bool all_pass() const {
        for (const auto& t : terms) {
            if (!t.pass) {
                return false;
            }
        }
        return true;
    }
};

/// Exact scan of stored triples: pass iff every off-diagonal entry <= tol.
inline StoqTermVerdict check_stoquastic_term(const SparseOperator& op, const std::string& name,
                                             double tol = 1e-12) {
    StoqTermVerdict v;
    v.name = name;
    for (const auto& t : op.triples()) {
        if (t.row != t.col && t.value > v.worst_offdiag) {
            v.worst_offdiag = t.value;
            v.worst_row = t.row;
            v.worst_col = t.col;
        }
    }
    v.pass = v.worst_offdiag <= tol;
    return v;
}

/// Term-wise scan of a local-block decomposition. Every local off-diagonal
/// contributes a distinct or summed global off-diagonal with the same sign
/// pattern, so local non-positivity certifies the assembled term without
/// building it.
inline StoqTermVerdict check_stoquastic_local(const std::vector<LocalTerm>& terms,
                                              const std::string& name, double tol = 1e-12) {
    StoqTermVerdict v;
    v.name = name;
    for (std::size_t n = 0; n < terms.size(); ++n) {
        const auto& lt = terms[n];
        const int ld = lt.local_dim();
        for (int r = 0; r < ld; ++r) {
            for (int c = 0; c < ld; ++c) {
                if (r != c && lt.at(r, c) > v.worst_offdiag) {
                    v.worst_offdiag = lt.at(r, c);
                    v.worst_row = static_cast<index_t>(n);  // block index, local row/col packed
                    v.worst_col = static_cast<index_t>(r) * ld + c;
                }
            }
        }
    }
    v.pass = v.worst_offdiag <= tol;
    return v;
}

inline StoqReport check_stoquastic(const std::vector<std::pair<std::string, const SparseOperator*>>& named,
                                   double tol = 1e-12) {
    StoqReport rep;
    rep.tolerance = tol;
    for (const auto& [name, op] : named) {
        rep.terms.push_back(check_stoquastic_term(*op, name, tol));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Eigenvalue estimation
// ---------------------------------------------------------------------------

struct SpectrumResult {
    double lambda_min = 0.0;
    std::optional<double> lambda_second;
    double residual = 0.0;
    std::string method;  // dense | iterative | restricted
    int matvecs = 0;
};

class NonConvergenceError : public std::runtime_error {
  public:
    NonConvergenceError(const std::string& what, double best, double residual)
        : std::runtime_error(what), best_estimate(best), residual(residual) {}
    double best_estimate;
    double residual;
};

inline Eigen::MatrixXd to_dense(const SparseOperator& op) {
    if (op.dim() > 20000) {
        throw std::invalid_argument("to_dense: operator too large for dense conversion");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(op.dim(), op.dim());
    for (const auto& t : op.triples()) {
        m(t.row, t.col) += t.value;
    }
    return m;
}

inline std::vector<double> dense_eigenvalues(const SparseOperator& op) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(op), Eigen::EigenvaluesOnly);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + op.dim());
    return ev;
}

inline SpectrumResult min_eigenvalue_dense(const SparseOperator& op) {
    auto ev = dense_eigenvalues(op);
    SpectrumResult r;
    r.lambda_min = ev.front();
    if (ev.size() > 1) {
        r.lambda_second = ev[1];
    }
    r.residual = 0.0;
    r.method = "dense";
    return r;
}

struct LanczosOptions {
    double tol_rel = 1e-8;   // residual <= tol_rel * ||H||
    int max_matvecs = 60000;
    int basis_cap = 32;
    int keep = 8;
    bool want_second = false;
    int threads = 0;
};

/// Thick-restarted Lanczos for the smallest eigenpair of a symmetric operator.
/// The seed is the normalized all-ones vector; breakdowns are recovered with a
/// fixed family of probe vectors, so runs are deterministic.
inline SpectrumResult lanczos_min(const std::function<void(const double*, double*)>& apply,
                                  index_t dim, double norm_scale, const LanczosOptions& opt = {}) {
    using Vec = std::vector<double>;
    if (dim == 1) {
        Vec x{1.0}, y{0.0};
        apply(x.data(), y.data());
        return {y[0], std::nullopt, 0.0, "iterative", 1};
    }
    const double tol_abs = opt.tol_rel * std::max(1.0, norm_scale);
    const int m_cap = std::max(4, std::min<int>(opt.basis_cap, static_cast<int>(dim)));
    const int keep = std::min(opt.keep, m_cap - 2);

    std::deque<Vec> basis;
    Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(m_cap, m_cap);
    int matvecs = 0;
    int probe_id = 0;

    const int nw = std::max(1, std::min<int>(worker_count(opt.threads), dim > 100000 ? 8 : 1));
    auto parallel = [&](auto&& fn) {
        if (nw == 1) {
            fn(0, dim, 0);
            return;
        }
        std::vector<std::thread> pool;
        const index_t chunk = (dim + nw - 1) / nw;
        for (int w = 0; w < nw; ++w) {
            const index_t lo = w * chunk;
            const index_t hi = std::min(dim, lo + chunk);
            if (lo < hi) {
                pool.emplace_back(fn, lo, hi, w);
            }
        }
        for (auto& th : pool) {
            th.join();
        }
    };
    std::vector<double> partial(std::max(1, nw), 0.0);
    auto dot = [&](const Vec& a, const Vec& b) {
        std::fill(partial.begin(), partial.end(), 0.0);
        parallel([&](index_t lo, index_t hi, int w) {
            double s = 0.0;
            for (index_t i = lo; i < hi; ++i) {
                s += a[i] * b[i];
            }
            partial[w] = s;
        });
        double s = 0.0;
        for (double p : partial) {
            s += p;  // fixed summation order keeps runs reproducible
        }
        return s;
    };
    auto norm = [&](const Vec& a) { return std::sqrt(dot(a, a)); };
    auto orthogonalize = [&](Vec& w) {
        // Two-pass classical Gram-Schmidt, with the second pass skipped when
        // the first barely rotated the vector.
        const double before = norm(w);
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& v : basis) {
                const double c = dot(w, v);
                if (c == 0.0) {
                    continue;
                }
                parallel([&](index_t lo, index_t hi, int) {
                    for (index_t i = lo; i < hi; ++i) {
                        w[i] -= c * v[i];
                    }
                });
            }
            if (pass == 0 && norm(w) > 0.5 * before) {
                break;
            }
        }
    };
    auto next_probe = [&]() {
        Vec w(dim);
        if (probe_id == 0) {
            std::fill(w.begin(), w.end(), 1.0);
        } else {
            for (index_t i = 0; i < dim; ++i) {
                w[i] = std::sin(0.7548776662 * static_cast<double>(i + probe_id));
            }
        }
        ++probe_id;
        orthogonalize(w);
        const double n = norm(w);
        if (n < 1e-12) {
            return Vec{};
        }
        for (auto& x : w) {
            x /= n;
        }
        return w;
    };

    {
        Vec v0 = next_probe();
        basis.push_back(std::move(v0));
    }

    double best_theta = 0.0;
    double best_res = std::numeric_limits<double>::infinity();
    std::optional<double> second_theta;
    // Convergence is only declared after a probe round confirms that fresh
    // directions do not lower the minimum: the fixed seed may have no overlap
    // with the true ground state.
    std::optional<double> confirmed_theta;
    bool exhausted = false;

    Vec w(dim), tmp(dim);
    while (matvecs < opt.max_matvecs) {
        // Extend the basis with A * (newest vector).
        const int j = static_cast<int>(basis.size());
        apply(basis.back().data(), w.data());
        ++matvecs;
        for (int i = 0; i < j; ++i) {
            const double c = dot(w, basis[i]);
            proj(i, j - 1) = c;
            proj(j - 1, i) = c;
        }
        orthogonalize(w);
        const double bnorm = norm(w);
        bool extended = false;
        if (bnorm > 1e-10 * std::max(1.0, norm_scale) && j < m_cap) {
            for (auto& x : w) {
                x /= bnorm;
            }
            basis.push_back(w);
            extended = true;
        }

        const bool at_cap = static_cast<int>(basis.size()) >= m_cap;
        const bool stalled = !extended;
        if (at_cap || stalled) {
            // Rayleigh-Ritz on the current subspace.
            const int jb = stalled ? j : static_cast<int>(basis.size()) - 1;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(proj.topLeftCorner(jb, jb));
            const auto& theta = es.eigenvalues();
            const auto& S = es.eigenvectors();
            const int nkeep = std::min(keep, jb);
            std::vector<Vec> ritz(nkeep, Vec(dim, 0.0));
            for (int r = 0; r < nkeep; ++r) {
                parallel([&](index_t lo, index_t hi, int) {
                    for (int i = 0; i < jb; ++i) {
                        const double c = S(i, r);
                        double* out = ritz[r].data();
                        const double* in = basis[i].data();
                        for (index_t x = lo; x < hi; ++x) {
                            out[x] += c * in[x];
                        }
                    }
                });
            }
            // Exact residual of the lowest (and optionally second) Ritz pair.
            apply(ritz[0].data(), tmp.data());
            ++matvecs;
            std::fill(partial.begin(), partial.end(), 0.0);
            parallel([&](index_t lo, index_t hi, int w) {
                double s = 0.0;
                for (index_t i = lo; i < hi; ++i) {
                    const double d = tmp[i] - theta(0) * ritz[0][i];
                    s += d * d;
                }
                partial[w] = s;
            });
            double res = 0.0;
            for (double p : partial) {
                res += p;
            }
            res = std::sqrt(res);
            best_theta = theta(0);
            best_res = res;
            bool second_ok = !opt.want_second;
            if (opt.want_second && nkeep > 1) {
                apply(ritz[1].data(), tmp.data());
                ++matvecs;
                double res2 = 0.0;
                for (index_t i = 0; i < dim; ++i) {
                    const double d = tmp[i] - theta(1) * ritz[1][i];
                    res2 += d * d;
                }
                res2 = std::sqrt(res2);
                if (res2 <= tol_abs) {
                    second_theta = theta(1);
                    second_ok = true;
                }
            }
            const bool low_converged = res <= tol_abs && second_ok;
            bool probe_round = false;
            if (low_converged) {
                if (confirmed_theta && best_theta >= *confirmed_theta - tol_abs) {
                    return {best_theta, second_theta, res, "iterative", matvecs};
                }
                confirmed_theta = best_theta;
                probe_round = true;  // confirm against a fresh direction
            } else if (confirmed_theta && best_theta < *confirmed_theta - tol_abs) {
                confirmed_theta.reset();  // a probe found something lower
            }

            // Thick restart: keep the lowest Ritz vectors, then continue the
            // chain from a fresh direction.
            basis.clear();
            proj.setZero();
            for (int r = 0; r < nkeep; ++r) {
                proj(r, r) = theta(r);
                basis.push_back(std::move(ritz[r]));
            }
            Vec carry;
            if (stalled || probe_round) {
                carry = next_probe();
                if (carry.empty()) {
                    // The reachable space is exhausted: Ritz values are exact.
                    exhausted = true;
                }
            } else {
                carry = w;  // already normalized and orthogonal to the old basis
                orthogonalize(carry);
                const double cn = norm(carry);
                if (cn < 1e-12) {
                    carry = next_probe();
                    if (carry.empty()) {
                        exhausted = true;
                    }
                } else {
                    for (auto& x : carry) {
                        x /= cn;
                    }
                }
            }
            if (exhausted) {
                if (best_res <= tol_abs || dim <= static_cast<index_t>(m_cap)) {
                    return {best_theta, second_theta, best_res, "iterative", matvecs};
                }
                throw NonConvergenceError("lanczos_min: probe space exhausted before convergence",
                                          best_theta, best_res);
            }
            basis.push_back(std::move(carry));
        }
    }
    throw NonConvergenceError("lanczos_min: iteration cap reached before convergence (best " +
                                  std::to_string(best_theta) + ", residual " + std::to_string(best_res) + ")",
                              best_theta, best_res);
}

enum class EigMode { Auto, Dense, Iterative };

/// Smallest eigenvalue of a symmetric operator: dense solve when dim <= 1e4,
/// otherwise restarted Lanczos with residual certification.
inline SpectrumResult min_eigenvalue(const SparseOperator& op, EigMode mode = EigMode::Auto,
                                     LanczosOptions opt = {}) {
    if (!op.is_canonical()) {
        throw std::logic_error("min_eigenvalue: canonicalize first");
    }
    const bool dense = mode == EigMode::Dense || (mode == EigMode::Auto && op.dim() <= 10000);
    if (dense) {
        if (op.dim() > 10000) {
            throw std::invalid_argument("min_eigenvalue: dense mode limited to dim <= 10^4");
        }
        return min_eigenvalue_dense(op);
    }
    op.build_csr();
    const double scale = op.norm_bound();
    auto apply = [&](const double* x, double* y) { op.matvec(x, y, opt.threads); };
    return lanczos_min(apply, op.dim(), scale, opt);
}

// ---------------------------------------------------------------------------
// Restricted-subspace machinery
// ---------------------------------------------------------------------------

/// Breadth-first closure of `seeds` under nonzero off-diagonal connections.
/// The operator is symmetric, so scanning rows covers both directions.
inline std::vector<index_t> reachable_closure(const SparseOperator& op,
                                              const std::vector<index_t>& seeds) {
    if (!op.is_canonical()) {
        throw std::logic_error("reachable_closure: canonicalize first");
    }
    std::vector<index_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::deque<index_t> queue(sorted.begin(), sorted.end());
    const auto& trip = op.triples();
    while (!queue.empty()) {
        const index_t q = queue.front();
        queue.pop_front();
        auto lo = std::lower_bound(trip.begin(), trip.end(), q,
                                   [](const Triple& t, index_t r) { return t.row < r; });
        for (auto it = lo; it != trip.end() && it->row == q; ++it) {
            if (it->col == q || it->value == 0.0) {
                continue;
            }
            auto pos = std::lower_bound(sorted.begin(), sorted.end(), it->col);
            if (pos == sorted.end() || *pos != it->col) {
                sorted.insert(pos, it->col);
                queue.push_back(it->col);
            }
        }
    }
    return sorted;
}

struct RestrictionResult {
    SparseOperator op;
    std::vector<index_t> subspace;  // global index of each restricted coordinate
};

/// Restricts an operator to the reachable closure of seed basis states.
inline RestrictionResult restrict_to_reachable(const SparseOperator& op,
                                               const std::vector<index_t>& seeds) {
    RestrictionResult r;
    r.subspace = reachable_closure(op, seeds);
    r.op = op.restrict_to(r.subspace);
    return r;
}

// ---------------------------------------------------------------------------
// Geometric lower bound for sums of PSD operators
// ---------------------------------------------------------------------------

struct GeometricBoundResult {
    double lambda = 0.0;          // min of the two second eigenvalues
    double lambda2_a = 0.0;       // smallest nonzero eigenvalue of A1
    double lambda2_b = 0.0;       // smallest nonzero eigenvalue of A2
    double cos_theta = 0.0;       // principal angle between the null spaces
    double sin2_half_theta = 0.0;
    double bound = 0.0;           // lambda * sin^2(theta/2)
    double lambda_min_sum = 0.0;  // dense minimum eigenvalue of A1 + A2
    int null_dim_a = 0;
    int null_dim_b = 0;
};

/// Evaluates the angle-based lower bound on lambda_min(A1 + A2) for two PSD
/// operators with nontrivial null spaces, and checks it against the dense
/// minimum of the sum. Dense path only; use restricted operators.
inline GeometricBoundResult geometric_bound(const SparseOperator& a1, const SparseOperator& a2,
                                            double null_tol = 1e-9) {
    if (a1.dim() != a2.dim()) {
        throw std::invalid_argument("geometric_bound: dimension mismatch");
    }
    const Eigen::MatrixXd m1 = to_dense(a1);
    const Eigen::MatrixXd m2 = to_dense(a2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(m1), e2(m2);
    GeometricBoundResult out;
    const double s1 = std::max(1.0, std::abs(e1.eigenvalues()(a1.dim() - 1)));
    const double s2 = std::max(1.0, std::abs(e2.eigenvalues()(a2.dim() - 1)));
    if (e1.eigenvalues()(0) < -null_tol * s1 || e2.eigenvalues()(0) < -null_tol * s2) {
        throw std::invalid_argument("geometric_bound: inputs must be PSD");
    }
    auto split = [&](const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, double scale,
                     int& null_dim, double& lambda2) {
        const auto& ev = es.eigenvalues();
        null_dim = 0;
        lambda2 = 0.0;
        for (int i = 0; i < ev.size(); ++i) {
            if (ev(i) <= null_tol * scale) {
                ++null_dim;
            } else {
                lambda2 = ev(i);
                break;
            }
        }
        return es.eigenvectors().leftCols(null_dim);
    };
    const Eigen::MatrixXd n1 = split(e1, s1, out.null_dim_a, out.lambda2_a);
    const Eigen::MatrixXd n2 = split(e2, s2, out.null_dim_b, out.lambda2_b);
    if (out.null_dim_a == 0 || out.null_dim_b == 0) {
        throw std::invalid_argument("geometric_bound: both operators need a nontrivial null space");
    }
    out.lambda = std::min(out.lambda2_a, out.lambda2_b);
    const Eigen::MatrixXd overlap = n1.transpose() * n2;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
    out.cos_theta = std::min(1.0, svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0);
    out.sin2_half_theta = (1.0 - out.cos_theta) / 2.0;
    out.bound = out.lambda * out.sin2_half_theta;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esum(m1 + m2, Eigen::EigenvaluesOnly);
    out.lambda_min_sum = esum.eigenvalues()(0);
    if (out.lambda_min_sum < out.bound - 1e-9) {
        throw std::logic_error("geometric_bound: certified bound exceeds the actual minimum");
    }
    return out;
}

}  // namespace stoqham
