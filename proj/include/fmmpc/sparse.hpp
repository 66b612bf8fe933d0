#ifndef FMMPC_SPARSE_HPP
#define FMMPC_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace fmmpc
{

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

// Compressed sparse row matrix with sorted, unique column indices per row.
class CsrMatrix
{
public:
    CsrMatrix() = default;

    // Duplicate (row, col) entries are summed. Explicit zeros are kept so the
    // sparsity pattern follows the assembly pattern.
    static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries)
    {
        for (const auto &t : entries) {
            if (t.row >= rows || t.col >= cols) {
                throw std::out_of_range("triplet index outside matrix");
            }
        }
        std::sort(entries.begin(), entries.end(),
                  [](const Triplet &a, const Triplet &b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
        CsrMatrix m;
        m.m_rows = rows;
        m.m_cols = cols;
        m.m_row_ptr.assign(rows + 1, 0);
        for (std::size_t k = 0; k < entries.size();) {
            std::size_t j = k;
            double v = 0;
            while (j < entries.size() && entries[j].row == entries[k].row && entries[j].col == entries[k].col) {
                v += entries[j].value;
                ++j;
            }
            m.m_col_idx.push_back(entries[k].col);
            m.m_values.push_back(v);
            ++m.m_row_ptr[entries[k].row + 1];
            k = j;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            m.m_row_ptr[r + 1] += m.m_row_ptr[r];
        }
        return m;
    }

    static CsrMatrix identity(std::size_t n)
    {
        std::vector<Triplet> t;
        t.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            t.push_back({i, i, 1.0});
        }
        return from_triplets(n, n, std::move(t));
    }

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    std::size_t nonzeros() const { return m_values.size(); }
    const std::vector<std::size_t> &row_ptr() const { return m_row_ptr; }
    const std::vector<std::size_t> &col_idx() const { return m_col_idx; }
    const std::vector<double> &values() const { return m_values; }

    // y = A x
    void multiply(std::span<const double> x, std::span<double> y) const
    {
        if (x.size() != m_cols || y.size() != m_rows) {
            throw std::invalid_argument("dimension mismatch in CsrMatrix::multiply");
        }
        for (std::size_t r = 0; r < m_rows; ++r) {
            double acc = 0;
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k) {
                acc += m_values[k] * x[m_col_idx[k]];
            }
            y[r] = acc;
        }
    }

    std::vector<double> operator*(std::span<const double> x) const
    {
        std::vector<double> y(m_rows);
        multiply(x, y);
        return y;
    }

    // y += A^T x
    void multiply_transpose_add(std::span<const double> x, std::span<double> y) const
    {
        if (x.size() != m_rows || y.size() != m_cols) {
            throw std::invalid_argument("dimension mismatch in CsrMatrix::multiply_transpose_add");
        }
        for (std::size_t r = 0; r < m_rows; ++r) {
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k) {
                y[m_col_idx[k]] += m_values[k] * x[r];
            }
        }
    }

    double at(std::size_t r, std::size_t c) const
    {
        const auto first = m_col_idx.begin() + static_cast<std::ptrdiff_t>(m_row_ptr[r]);
        const auto last = m_col_idx.begin() + static_cast<std::ptrdiff_t>(m_row_ptr[r + 1]);
        const auto it = std::lower_bound(first, last, c);
        if (it == last || *it != c) {
            return 0.0;
        }
        return m_values[static_cast<std::size_t>(it - m_col_idx.begin())];
    }

    std::vector<double> diagonal() const
    {
        std::vector<double> d(std::min(m_rows, m_cols), 0.0);
        for (std::size_t r = 0; r < d.size(); ++r) {
            d[r] = at(r, r);
        }
        return d;
    }

    CsrMatrix transpose() const
    {
        std::vector<Triplet> t;
        t.reserve(nonzeros());
        for (std::size_t r = 0; r < m_rows; ++r) {
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k) {
                t.push_back({m_col_idx[k], r, m_values[k]});
            }
        }
        return from_triplets(m_cols, m_rows, std::move(t));
    }

    // Largest |A_ij - A_ji| over the stored pattern of both A and A^T.
    double symmetry_defect() const
    {
        if (m_rows != m_cols) {
            throw std::invalid_argument("symmetry_defect requires a square matrix");
        }
        double worst = 0;
        for (std::size_t r = 0; r < m_rows; ++r) {
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k) {
                worst = std::max(worst, std::abs(m_values[k] - at(m_col_idx[k], r)));
            }
        }
        return worst;
    }

    // Submatrix of rows [r0, r0 + nr) and columns [c0, c0 + nc).
    CsrMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const
    {
        if (r0 + nr > m_rows || c0 + nc > m_cols) {
            throw std::out_of_range("block outside matrix");
        }
        std::vector<Triplet> t;
        for (std::size_t r = r0; r < r0 + nr; ++r) {
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k) {
                const std::size_t c = m_col_idx[k];
                if (c >= c0 && c < c0 + nc) {
                    t.push_back({r - r0, c - c0, m_values[k]});
                }
            }
        }
        return from_triplets(nr, nc, std::move(t));
    }

    void append_triplets(std::vector<Triplet> &out, std::size_t row_offset, std::size_t col_offset,
                         double scale = 1.0) const
    {
        for (std::size_t r = 0; r < m_rows; ++r) {
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k) {
                out.push_back({r + row_offset, m_col_idx[k] + col_offset, scale * m_values[k]});
            }
        }
    }

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<std::size_t> m_row_ptr{0};
    std::vector<std::size_t> m_col_idx;
    std::vector<double> m_values;
};

} // namespace fmmpc

#endif
