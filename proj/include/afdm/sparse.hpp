#pragma once

// Sparse DAFT-domain channel matrices. Every subchannel matrix has exactly one
// nonzero per row, on the cyclic diagonal column = (row + offset) mod N, so an
// effective channel is stored as a short list of such diagonals.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "afdm/daft.hpp"

namespace afdm {

inline int wrap_index(long i, int n)
{
    const long r = i % n;
    return static_cast<int>(r < 0 ? r + n : r);
}

/// Entry (m, (m+offset) mod N) equals coeff[m]; all other entries are zero.
struct CyclicDiagonal
{
    int offset = 0;
    CVector coeff;
};

class SparseChannelMatrix
{
  public:
    SparseChannelMatrix() = default;
    explicit SparseChannelMatrix(int n) : n_(n) {}

    int size() const { return n_; }
    const std::vector<CyclicDiagonal> &diagonals() const { return diags_; }
    bool empty() const { return diags_.empty(); }

    /// Adds scale * d; diagonals with the same offset (mod N) are merged.
    void add(const CyclicDiagonal &d, cplx scale = 1.0)
    {
        if (d.coeff.size() != n_)
            throw std::invalid_argument("SparseChannelMatrix::add: diagonal length mismatch");
        const int off = wrap_index(d.offset, n_);
        auto it = std::find_if(diags_.begin(), diags_.end(),
                               [off](const CyclicDiagonal &e) { return e.offset == off; });
        if (it == diags_.end())
            diags_.push_back({off, d.coeff * scale});
        else
            it->coeff += d.coeff * scale;
    }

    CVector apply(const CVector &x) const
    {
        if (x.size() != n_)
            throw std::invalid_argument("SparseChannelMatrix::apply: length mismatch");
        CVector out = CVector::Zero(n_);
        for (const auto &d : diags_)
        {
            for (int m = 0, k = d.offset; m < n_; ++m, ++k)
            {
                if (k == n_)
                    k = 0;
                out[m] += d.coeff[m] * x[k];
            }
        }
        return out;
    }

    CMatrix to_dense() const
    {
        CMatrix out = CMatrix::Zero(n_, n_);
        for (const auto &d : diags_)
            for (int m = 0; m < n_; ++m)
                out(m, wrap_index(static_cast<long>(m) + d.offset, n_)) += d.coeff[m];
        return out;
    }

  private:
    int n_ = 0;
    std::vector<CyclicDiagonal> diags_;
};

} // namespace afdm
