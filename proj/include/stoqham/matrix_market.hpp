#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "stoqham/sparse.hpp"

namespace stoqham {

/// Writes a canonical symmetric operator in Matrix Market coordinate format,
/// 1-indexed, lower triangle stored.
inline void write_matrix_market(const SparseOperator& op, const std::string& path) {
    if (!op.is_canonical()) {
        throw std::logic_error("write_matrix_market: canonicalize first");
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_matrix_market: cannot open " + path);
    }
    std::size_t nnz_lower = 0;
    for (const auto& t : op.triples()) {
        if (t.row >= t.col) {
            ++nnz_lower;
        }
    }
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << op.dim() << " " << op.dim() << " " << nnz_lower << "\n";
    out << std::setprecision(17);
    for (const auto& t : op.triples()) {
        if (t.row >= t.col) {
            out << (t.row + 1) << " " << (t.col + 1) << " " << t.value << "\n";
        }
    }
    if (!out) {
        throw std::runtime_error("write_matrix_market: write failed for " + path);
    }
}

inline SparseOperator read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_matrix_market: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
        throw std::runtime_error("read_matrix_market: missing MatrixMarket header in " + path);
    }
    const bool symmetric = line.find("symmetric") != std::string::npos;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') {
            break;
        }
    }
    std::istringstream head(line);
    index_t rows = 0, cols = 0;
    std::size_t nnz = 0;
    if (!(head >> rows >> cols >> nnz) || rows != cols) {
        throw std::runtime_error("read_matrix_market: bad size line in " + path);
    }
    SparseOperator op(rows);
    op.reserve(symmetric ? 2 * nnz : nnz);
    for (std::size_t i = 0; i < nnz; ++i) {
        index_t r = 0, c = 0;
        double v = 0.0;
        if (!(in >> r >> c >> v)) {
            throw std::runtime_error("read_matrix_market: truncated entries in " + path);
        }
        op.add(r - 1, c - 1, v);
        if (symmetric && r != c) {
            op.add(c - 1, r - 1, v);
        }
    }
    op.canonicalize();
    return op;
}

}  // namespace stoqham
