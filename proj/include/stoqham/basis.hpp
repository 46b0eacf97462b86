#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stoqham {

using index_t = std::int64_t;

/// Product-space layout: `site_count` sites of local dimension `site_dim`.
/// Site 0 is the least significant digit of the flattened basis index.
struct BasisDescriptor {
    int site_count = 0;
    int site_dim = 0;

    index_t dim() const {
        index_t d = 1;
        for (int s = 0; s < site_count; ++s) {
            d *= site_dim;
        }
        return d;
    }

    index_t stride(int site) const {
        index_t d = 1;
        for (int s = 0; s < site; ++s) {
            d *= site_dim;
        }
        return d;
    }

    int digit(index_t basis_index, int site) const {
        return static_cast<int>((basis_index / stride(site)) % site_dim);
    }

    index_t with_digit(index_t basis_index, int site, int value) const {
        const index_t st = stride(site);
        const int old = digit(basis_index, site);
        return basis_index + st * (value - old);
    }

    std::vector<int> digits(index_t basis_index) const {
        std::vector<int> out(site_count);
        for (int s = 0; s < site_count; ++s) {
            out[s] = static_cast<int>(basis_index % site_dim);
            basis_index /= site_dim;
        }
        return out;
    }

    index_t pack(const std::vector<int>& ds) const {
        if (static_cast<int>(ds.size()) != site_count) {
            throw std::invalid_argument("pack: digit count does not match site count");
        }
        index_t idx = 0;
        for (int s = site_count - 1; s >= 0; --s) {
            idx = idx * site_dim + ds[s];
        }
        return idx;
    }
};

/// Checked exponentiation used by size-cap guards: returns base^count or -1 on overflow.
inline index_t checked_pow(index_t base, int count) {
    index_t d = 1;
    for (int s = 0; s < count; ++s) {
        if (d > (INT64_C(1) << 62) / base) {
            return -1;
        }
        d *= base;
    }
    return d;
}

}  // namespace stoqham
