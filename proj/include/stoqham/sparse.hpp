#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "stoqham/basis.hpp"

namespace stoqham {

struct Triple {
    index_t row = 0;
    index_t col = 0;
    double value = 0.0;
};

/// Real symmetric operator stored as coordinate triples over an explicit
/// product basis. Triples accumulate; canonicalize() sorts and sums duplicates.
class SparseOperator {
  public:
    SparseOperator() = default;
    explicit SparseOperator(index_t dim, BasisDescriptor basis = {}) : dim_(dim), basis_(basis) {}

    index_t dim() const { return dim_; }
    const BasisDescriptor& basis() const { return basis_; }
    const std::vector<Triple>& triples() const { return triples_; }

    void reserve(std::size_t n) { triples_.reserve(n); }

    void add(index_t r, index_t c, double v) {
        if (r < 0 || r >= dim_ || c < 0 || c >= dim_) {
            throw std::out_of_range("SparseOperator::add: index out of range");
        }
        if (v != 0.0) {
            triples_.push_back({r, c, v});
            canonical_ = false;
        }
    }

    /// Adds v at (r,c) and (c,r). Diagonal entries are added once.
    void add_sym(index_t r, index_t c, double v) {
        add(r, c, v);
        if (r != c) {
            add(c, r, v);
        }
    }

    void canonicalize() {
        if (canonical_) {
            return;
        }
        std::sort(triples_.begin(), triples_.end(), [](const Triple& a, const Triple& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        std::size_t w = 0;
        for (std::size_t i = 0; i < triples_.size();) {
            Triple t = triples_[i];
            std::size_t j = i + 1;
            while (j < triples_.size() && triples_[j].row == t.row && triples_[j].col == t.col) {
                t.value += triples_[j].value;
                ++j;
            }
            if (t.value != 0.0) {
                triples_[w++] = t;
            }
            i = j;
        }
        triples_.resize(w);
        canonical_ = true;
    }

    bool is_canonical() const { return canonical_; }

    /// Max |A - A^T| entry; requires canonical form.
    double symmetry_defect() const {
        if (!canonical_) {
            throw std::logic_error("symmetry_defect: canonicalize first");
        }
        std::vector<Triple> t = triples_;
        for (auto& x : t) {
            std::swap(x.row, x.col);
        }
        std::sort(t.begin(), t.end(), [](const Triple& a, const Triple& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        double worst = 0.0;
        std::size_t i = 0, j = 0;
        while (i < triples_.size() || j < t.size()) {
            if (j == t.size() ||
                (i < triples_.size() && (triples_[i].row < t[j].row ||
                                         (triples_[i].row == t[j].row && triples_[i].col < t[j].col)))) {
                worst = std::max(worst, std::abs(triples_[i].value));
                ++i;
            } else if (i == triples_.size() || t[j].row < triples_[i].row ||
                       (t[j].row == triples_[i].row && t[j].col < triples_[i].col)) {
                worst = std::max(worst, std::abs(t[j].value));
                ++j;
            } else {
                worst = std::max(worst, std::abs(triples_[i].value - t[j].value));
                ++i;
                ++j;
            }
        }
        return worst;
    }

    SparseOperator& operator+=(const SparseOperator& other) {
        if (other.dim_ != dim_) {
            throw std::invalid_argument("operator+=: dimension mismatch");
        }
        triples_.insert(triples_.end(), other.triples_.begin(), other.triples_.end());
        canonical_ = false;
        return *this;
    }

    SparseOperator& scale(double a) {
        for (auto& t : triples_) {
            t.value *= a;
        }
        return *this;
    }

    /// Restriction to a coordinate subspace given by a sorted index list.
    SparseOperator restrict_to(const std::vector<index_t>& subspace) const {
        std::vector<index_t> pos(subspace.size());
        SparseOperator out(static_cast<index_t>(subspace.size()));
        for (const auto& t : triples_) {
            auto ri = std::lower_bound(subspace.begin(), subspace.end(), t.row);
            if (ri == subspace.end() || *ri != t.row) {
                continue;
            }
            auto ci = std::lower_bound(subspace.begin(), subspace.end(), t.col);
            if (ci == subspace.end() || *ci != t.col) {
                continue;
            }
            out.add(ri - subspace.begin(), ci - subspace.begin(), t.value);
        }
        out.canonicalize();
        return out;
    }

    double norm_bound() const;       // Gershgorin-style bound on the spectral radius
    void build_csr() const;
    void matvec(const double* x, double* y, int threads = 0) const;

  private:
    index_t dim_ = 0;
    BasisDescriptor basis_{};
    std::vector<Triple> triples_;
    bool canonical_ = true;

    mutable std::vector<index_t> csr_rowptr_;
    mutable std::vector<std::int32_t> csr_col_;
    mutable std::vector<double> csr_val_;
    mutable bool csr_ready_ = false;
};

inline void SparseOperator::build_csr() const {
    if (csr_ready_) {
        return;
    }
    if (!canonical_) {
        throw std::logic_error("build_csr: canonicalize first");
    }
    if (dim_ > INT32_MAX) {
        throw std::overflow_error("build_csr: dimension exceeds 32-bit column index range");
    }
    csr_rowptr_.assign(dim_ + 1, 0);
    csr_col_.resize(triples_.size());
    csr_val_.resize(triples_.size());
    for (const auto& t : triples_) {
        ++csr_rowptr_[t.row + 1];
    }
    for (index_t r = 0; r < dim_; ++r) {
        csr_rowptr_[r + 1] += csr_rowptr_[r];
    }
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        csr_col_[i] = static_cast<std::int32_t>(triples_[i].col);
        csr_val_[i] = triples_[i].value;
    }
    csr_ready_ = true;
}

inline double SparseOperator::norm_bound() const {
    build_csr();
    double worst = 0.0;
    for (index_t r = 0; r < dim_; ++r) {
        double s = 0.0;
        for (index_t i = csr_rowptr_[r]; i < csr_rowptr_[r + 1]; ++i) {
            s += std::abs(csr_val_[i]);
        }
        worst = std::max(worst, s);
    }
    return worst;
}

inline int worker_count(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("STOQHAM_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// y = A x. Output rows are partitioned across workers, so the result is
/// bitwise deterministic for any thread count.
inline void SparseOperator::matvec(const double* x, double* y, int threads) const {
    build_csr();
    const int nw = std::min<index_t>(worker_count(threads), std::max<index_t>(dim_, 1));
    auto run = [&](index_t r0, index_t r1) {
        for (index_t r = r0; r < r1; ++r) {
            double acc = 0.0;
            for (index_t i = csr_rowptr_[r]; i < csr_rowptr_[r + 1]; ++i) {
                acc += csr_val_[i] * x[csr_col_[i]];
            }
            y[r] = acc;
        }
    };
    if (nw <= 1 || dim_ < 4096) {
        run(0, dim_);
        return;
    }
    std::vector<std::thread> pool;
    const index_t chunk = (dim_ + nw - 1) / nw;
    for (int w = 0; w < nw; ++w) {
        const index_t r0 = w * chunk;
        const index_t r1 = std::min(dim_, r0 + chunk);
        if (r0 < r1) {
            pool.emplace_back(run, r0, r1);
        }
    }
    for (auto& th : pool) {
        th.join();
    }
}

/// One geometrically local summand: a dense matrix over the joint space of
/// `sites` (each of dimension `site_dim`), implicitly tensored with identity.
/// Named Hamiltonian terms are kept as lists of these so that term-wise
/// properties (stoquasticity, locality) can be checked without assembling
/// the full product-space operator.
struct LocalTerm {
    std::vector<int> sites;  // distinct flat site indices
    int site_dim = 0;
    std::vector<double> mat;  // row-major, size (site_dim^k)^2
    std::string label;

    int local_dim() const {
        int d = 1;
        for (std::size_t i = 0; i < sites.size(); ++i) {
            d *= site_dim;
        }
        return d;
    }

    double& at(int r, int c) { return mat[static_cast<std::size_t>(r) * local_dim() + c]; }
    double at(int r, int c) const { return mat[static_cast<std::size_t>(r) * local_dim() + c]; }

    static LocalTerm zero(std::vector<int> sites, int site_dim, std::string label = {}) {
        LocalTerm t;
        t.sites = std::move(sites);
        t.site_dim = site_dim;
        t.label = std::move(label);
        const std::size_t d = t.local_dim();
        t.mat.assign(d * d, 0.0);
        return t;
    }
};

/// Sparse vector over the product basis: sorted (index, amplitude) pairs.
using SparseVec = std::vector<std::pair<index_t, double>>;

inline void sparsevec_canonicalize(SparseVec& v) {
    std::sort(v.begin(), v.end());
    std::size_t w = 0;
    for (std::size_t i = 0; i < v.size();) {
        auto [idx, val] = v[i];
        std::size_t j = i + 1;
        while (j < v.size() && v[j].first == idx) {
            val += v[j].second;
            ++j;
        }
        if (val != 0.0) {
            v[w++] = {idx, val};
        }
        i = j;
    }
    v.resize(w);
}

namespace detail {

inline int local_state_of(const LocalTerm& t, const BasisDescriptor& basis, index_t global) {
    int local = 0;
    int stride = 1;
    for (int s : t.sites) {
        local += stride * basis.digit(global, s);
        stride *= basis.site_dim;
    }
    return local;
}

inline index_t local_offset_of(const LocalTerm& t, const BasisDescriptor& basis, int local) {
    index_t off = 0;
    int rem = local;
    for (int s : t.sites) {
        off += basis.stride(s) * (rem % basis.site_dim);
        rem /= basis.site_dim;
    }
    return off;
}

}  // namespace detail

/// Restriction of a local-term sum to a coordinate subspace (sorted global
/// indices), without assembling the full operator.
inline SparseOperator restrict_local(const std::vector<LocalTerm>& terms, const BasisDescriptor& basis,
                                     const std::vector<index_t>& subspace, double weight = 1.0) {
    SparseOperator out(static_cast<index_t>(subspace.size()));
    for (std::size_t a = 0; a < subspace.size(); ++a) {
        const index_t gi = subspace[a];
        for (const auto& t : terms) {
            const int li = detail::local_state_of(t, basis, gi);
            const index_t rest = gi - detail::local_offset_of(t, basis, li);
            const int ld = t.local_dim();
            for (int lj = 0; lj < ld; ++lj) {
                const double v = t.at(lj, li);
                if (v == 0.0) {
                    continue;
                }
                const index_t gj = rest + detail::local_offset_of(t, basis, lj);
                const auto it = std::lower_bound(subspace.begin(), subspace.end(), gj);
                if (it != subspace.end() && *it == gj) {
                    out.add(it - subspace.begin(), a, v * weight);
                }
            }
        }
    }
    out.canonicalize();
    return out;
}

/// <v|T|v> for a local-term sum and a sparse vector, without assembly.
inline double expectation_local(const std::vector<LocalTerm>& terms, const BasisDescriptor& basis,
                                const SparseVec& v) {
    double e = 0.0;
    for (const auto& [gi, amp] : v) {
        for (const auto& t : terms) {
            const int li = detail::local_state_of(t, basis, gi);
            const index_t rest = gi - detail::local_offset_of(t, basis, li);
            const int ld = t.local_dim();
            for (int lj = 0; lj < ld; ++lj) {
                const double val = t.at(lj, li);
                if (val == 0.0) {
                    continue;
                }
                const index_t gj = rest + detail::local_offset_of(t, basis, lj);
                const auto it = std::lower_bound(
                    v.begin(), v.end(), gj,
                    [](const std::pair<index_t, double>& p, index_t g) { return p.first < g; });
                if (it != v.end() && it->first == gj) {
                    e += it->second * val * amp;
                }
            }
        }
    }
    return e;
}

/// Assembles a list of local terms into a full product-space operator.
inline SparseOperator assemble(const std::vector<LocalTerm>& terms, const BasisDescriptor& basis) {
    SparseOperator op(basis.dim(), basis);
    std::vector<double> diag(basis.dim(), 0.0);
    for (const auto& term : terms) {
        const int k = static_cast<int>(term.sites.size());
        const int ld = term.local_dim();
        // Enumerate local index pairs once, then sweep the complementary sites.
        index_t rest_dim = basis.dim();
        for (int i = 0; i < k; ++i) {
            rest_dim /= basis.site_dim;
        }
        std::vector<index_t> strides(k);
        for (int i = 0; i < k; ++i) {
            strides[i] = basis.stride(term.sites[i]);
        }
        // Offset each local index contributes to the flattened basis index.
        std::vector<index_t> loc_off(ld);
        for (int l = 0; l < ld; ++l) {
            index_t off = 0;
            int rem = l;
            for (int i = 0; i < k; ++i) {
                off += strides[i] * (rem % basis.site_dim);
                rem /= basis.site_dim;
            }
            loc_off[l] = off;
        }
        // Enumerate the complementary sites.
        std::vector<int> other_sites;
        for (int s = 0; s < basis.site_count; ++s) {
            if (std::find(term.sites.begin(), term.sites.end(), s) == term.sites.end()) {
                other_sites.push_back(s);
            }
        }
        // Hoist the nonzero entries of the local matrix.
        std::vector<std::tuple<index_t, index_t, double>> nz;
        for (int lr = 0; lr < ld; ++lr) {
            for (int lc = 0; lc < ld; ++lc) {
                const double v = term.at(lr, lc);
                if (v != 0.0) {
                    nz.emplace_back(loc_off[lr], loc_off[lc], v);
                }
            }
        }
        for (index_t rest = 0; rest < rest_dim; ++rest) {
            index_t base = 0;
            index_t r = rest;
            for (std::size_t i = 0; i < other_sites.size(); ++i) {
                base += basis.stride(other_sites[i]) * (r % basis.site_dim);
                r /= basis.site_dim;
            }
            for (const auto& [ro, co, v] : nz) {
                if (ro == co) {
                    diag[base + ro] += v;
                } else {
                    op.add(base + ro, base + co, v);
                }
            }
        }
    }
    for (index_t i = 0; i < basis.dim(); ++i) {
        if (diag[i] != 0.0) {
            op.add(i, i, diag[i]);
        }
    }
    op.canonicalize();
    return op;
}

}  // namespace stoqham
