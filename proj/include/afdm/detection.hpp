#pragma once

// Symbol mapping, pilot cancellation and data detection on the sparse
// DAFT-domain channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "afdm/daft.hpp"
#include "afdm/estimation.hpp"
#include "afdm/sparse.hpp"

namespace afdm {

/// Constellation with point i carrying the bit label of i, MSB first.
struct SymbolAlphabet
{
    std::vector<cplx> points;
    int bits_per_symbol = 0;

    std::size_t size() const { return points.size(); }
};

/// Gray-coded unit-energy QPSK. Label b0 b1 maps to ((1-2*b0) + j(1-2*b1)) / sqrt(2):
///
///   00 -> ( 1 + j)/sqrt(2)    01 -> ( 1 - j)/sqrt(2)
///   10 -> (-1 + j)/sqrt(2)    11 -> (-1 - j)/sqrt(2)
inline SymbolAlphabet qpsk()
{
    const double a = 1.0 / std::numbers::sqrt2;
    return {{{a, a}, {a, -a}, {-a, a}, {-a, -a}}, 2};
}

inline SymbolAlphabet scaled(const SymbolAlphabet &alphabet, double amplitude)
{
    SymbolAlphabet out = alphabet;
    for (auto &p : out.points)
        p *= amplitude;
    return out;
}

inline std::vector<int> bits_to_indices(const BitVector &bits, const SymbolAlphabet &alphabet)
{
    const int bps = alphabet.bits_per_symbol;
    if (bps <= 0 || bits.size() % static_cast<std::size_t>(bps) != 0)
        throw std::invalid_argument("bits_to_indices: bit count is not a multiple of bits_per_symbol");
    std::vector<int> idx(bits.size() / bps);
    for (std::size_t s = 0; s < idx.size(); ++s)
    {
        int v = 0;
        for (int b = 0; b < bps; ++b)
            v = (v << 1) | (bits[s * bps + b] & 1);
        idx[s] = v;
    }
    return idx;
}

inline BitVector indices_to_bits(const std::vector<int> &indices, const SymbolAlphabet &alphabet)
{
    const int bps = alphabet.bits_per_symbol;
    BitVector bits(indices.size() * bps);
    for (std::size_t s = 0; s < indices.size(); ++s)
        for (int b = 0; b < bps; ++b)
            bits[s * bps + b] = static_cast<std::uint8_t>((indices[s] >> (bps - 1 - b)) & 1);
    return bits;
}

inline DaftFrame symbols_from_indices(const std::vector<int> &indices, const SymbolAlphabet &alphabet,
                                      double amplitude = 1.0)
{
    DaftFrame x(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t s = 0; s < indices.size(); ++s)
        x[static_cast<Eigen::Index>(s)] = amplitude * alphabet.points.at(static_cast<std::size_t>(indices[s]));
    return x;
}

/// Maps N * bits_per_symbol bits onto N symbols of energy sigma_d^2.
inline DaftFrame modulate_bits(const BitVector &bits, const SymbolAlphabet &alphabet, double sigma_d)
{
    return symbols_from_indices(bits_to_indices(bits, alphabet), alphabet, sigma_d);
}

/// Nearest-point decision per symbol.
inline std::vector<int> hard_decide(const DaftFrame &x, const SymbolAlphabet &alphabet, double amplitude = 1.0)
{
    std::vector<int> idx(static_cast<std::size_t>(x.size()));
    for (Eigen::Index s = 0; s < x.size(); ++s)
    {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < alphabet.size(); ++a)
        {
            const double d = std::norm(x[s] - amplitude * alphabet.points[a]);
            if (d < best)
            {
                best = d;
                idx[static_cast<std::size_t>(s)] = static_cast<int>(a);
            }
        }
    }
    return idx;
}

inline BitVector demodulate(const DaftFrame &x, const SymbolAlphabet &alphabet, double sigma_d)
{
    return indices_to_bits(hard_decide(x, alphabet, sigma_d), alphabet);
}

/// y_d = y - H_eff_hat x_p
inline DaftFrame cancel_pilots(const DaftFrame &y, const SparseChannelMatrix &h_eff_hat, const DaftFrame &pilot)
{
    if (y.size() != pilot.size() || y.size() != h_eff_hat.size())
        throw std::invalid_argument("cancel_pilots: dimension mismatch");
    return y - h_eff_hat.apply(pilot);
}

struct MpParams
{
    int max_iters = 30;
    double damping = 0.6;
    double tolerance = 1e-4;
};

struct MpResult
{
    std::vector<int> decisions;
    Eigen::MatrixXd posteriors; // N x |alphabet|, rows sum to 1
    bool converged = false;
    int iterations = 0;
};

/// Message-passing detector on a sparse channel. Each observation treats the
/// symbols it does not update as Gaussian interference (mean and variance
/// from the incoming symbol probabilities); variables combine the per-edge
/// likelihoods and send damped probability messages back. `alphabet` must
/// already carry the transmit amplitude.
///
/// Stops once the largest message change drops below `tolerance`. Without
/// convergence the iterate with the smallest residual ||y - H x||^2 is
/// returned and `converged` is false.
///
/// `noise` holds the noise variance of each observation row.
inline MpResult mp_detect(const DaftFrame &y, const SparseChannelMatrix &h, const SymbolAlphabet &alphabet,
                          const Eigen::VectorXd &noise, const MpParams &params = {})
{
    const int n = h.size();
    if (y.size() != n || noise.size() != n)
        throw std::invalid_argument("mp_detect: y or noise length does not match the channel");
    if (!(noise.minCoeff() > 0.0))
        throw std::invalid_argument("mp_detect: noise power must be positive");
    if (params.max_iters < 1)
        throw std::invalid_argument("mp_detect: max_iters must be positive");
    if (!(params.damping > 0.0 && params.damping <= 1.0))
        throw std::invalid_argument("mp_detect: damping must lie in (0, 1]");
    if (alphabet.size() == 0)
        throw std::invalid_argument("mp_detect: empty alphabet");

    const auto &diags = h.diagonals();
    const int nd = static_cast<int>(diags.size());
    const int na = static_cast<int>(alphabet.size());
    const auto &pts = alphabet.points;

    std::vector<double> point_energy(na);
    for (int a = 0; a < na; ++a)
        point_energy[a] = std::norm(pts[a]);

    // Messages indexed by edge (row m, diagonal d); the edge variable is column (m + offset_d) mod N.
    auto edge = [nd](int m, int d) { return static_cast<std::size_t>(m) * nd + d; };
    std::vector<double> msg(static_cast<std::size_t>(n) * nd * na, 1.0 / na);
    std::vector<cplx> edge_mean(static_cast<std::size_t>(n) * nd);
    std::vector<double> edge_var(static_cast<std::size_t>(n) * nd);
    std::vector<cplx> obs_mean(static_cast<std::size_t>(n) * nd);
    std::vector<double> obs_var(static_cast<std::size_t>(n) * nd);
    std::vector<double> loglik(static_cast<std::size_t>(nd) * na);
    std::vector<double> total(na);
    std::vector<double> tmp(na);

    MpResult current;
    current.posteriors = Eigen::MatrixXd::Constant(n, na, 1.0 / na);
    current.decisions.assign(n, 0);
    MpResult best;
    double best_residual = std::numeric_limits<double>::infinity();

    auto normalize_exp = [na](std::vector<double> &v) {
        const double mx = *std::max_element(v.begin(), v.begin() + na);
        double s = 0.0;
        for (int a = 0; a < na; ++a)
        {
            v[a] = std::exp(v[a] - mx);
            s += v[a];
        }
        for (int a = 0; a < na; ++a)
            v[a] /= s;
    };

    for (int iter = 1; iter <= params.max_iters; ++iter)
    {
        // Symbol statistics carried by each variable->observation message.
        for (std::size_t e = 0; e < edge_mean.size(); ++e)
        {
            const double *p = &msg[e * na];
            cplx mean = 0.0;
            double energy = 0.0;
            for (int a = 0; a < na; ++a)
            {
                mean += p[a] * pts[a];
                energy += p[a] * point_energy[a];
            }
            edge_mean[e] = mean;
            edge_var[e] = std::max(energy - std::norm(mean), 0.0);
        }

        // Observation side: Gaussian interference seen by each edge.
        for (int m = 0; m < n; ++m)
        {
            cplx mean_sum = 0.0;
            double var_sum = 0.0;
            for (int d = 0; d < nd; ++d)
            {
                const cplx c = diags[d].coeff[m];
                mean_sum += c * edge_mean[edge(m, d)];
                var_sum += std::norm(c) * edge_var[edge(m, d)];
            }
            for (int d = 0; d < nd; ++d)
            {
                const cplx c = diags[d].coeff[m];
                obs_mean[edge(m, d)] = mean_sum - c * edge_mean[edge(m, d)];
                obs_var[edge(m, d)] = std::max(var_sum - std::norm(c) * edge_var[edge(m, d)], 0.0) + noise[m];
            }
        }

        // Variable side.
        double max_change = 0.0;
        for (int k = 0; k < n; ++k)
        {
            std::fill(total.begin(), total.end(), 0.0);
            for (int d = 0; d < nd; ++d)
            {
                const int m = wrap_index(static_cast<long>(k) - diags[d].offset, n);
                const std::size_t e = edge(m, d);
                const cplx c = diags[d].coeff[m];
                const cplx r = y[m] - obs_mean[e];
                for (int a = 0; a < na; ++a)
                {
                    const double ll = -std::norm(r - c * pts[a]) / obs_var[e];
                    loglik[static_cast<std::size_t>(d) * na + a] = ll;
                    total[a] += ll;
                }
            }
            tmp = total;
            normalize_exp(tmp);
            int arg = 0;
            for (int a = 0; a < na; ++a)
            {
                current.posteriors(k, a) = tmp[a];
                if (tmp[a] > tmp[arg])
                    arg = a;
            }
            current.decisions[k] = arg;

            for (int d = 0; d < nd; ++d)
            {
                const int m = wrap_index(static_cast<long>(k) - diags[d].offset, n);
                double *p = &msg[edge(m, d) * na];
                for (int a = 0; a < na; ++a)
                    tmp[a] = total[a] - loglik[static_cast<std::size_t>(d) * na + a];
                normalize_exp(tmp);
                for (int a = 0; a < na; ++a)
                {
                    const double next = params.damping * tmp[a] + (1.0 - params.damping) * p[a];
                    max_change = std::max(max_change, std::abs(next - p[a]));
                    p[a] = next;
                }
            }
        }
        current.iterations = iter;

        const double residual =
            (y - h.apply(symbols_from_indices(current.decisions, alphabet))).squaredNorm();
        if (residual <= best_residual)
        {
            best_residual = residual;
            best = current;
        }
        if (max_change < params.tolerance)
        {
            current.converged = true;
            return current;
        }
    }
    best.converged = false;
    best.iterations = current.iterations;
    return best;
}

inline MpResult mp_detect(const DaftFrame &y, const SparseChannelMatrix &h, const SymbolAlphabet &alphabet,
                          double n0, const MpParams &params = {})
{
    return mp_detect(y, h, alphabet, Eigen::VectorXd::Constant(h.size(), n0), params);
}

/// Exhaustive maximum-likelihood detection, argmin ||y - H x||^2 over all
/// |A|^N frames. Limited to N * bits_per_symbol <= 20.
inline std::vector<int> exact_map_oracle(const DaftFrame &y, const CMatrix &h, const SymbolAlphabet &alphabet)
{
    const auto n = y.size();
    if (h.rows() != n || h.cols() != n)
        throw std::invalid_argument("exact_map_oracle: channel must be N x N");
    if (n * alphabet.bits_per_symbol > 20)
        throw std::invalid_argument("exact_map_oracle: instance too large (" +
                                    std::to_string(n * alphabet.bits_per_symbol) + " bits > 20)");
    const int na = static_cast<int>(alphabet.size());
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    // Odometer enumeration with an incrementally updated residual y - H x.
    CVector residual = y;
    for (Eigen::Index k = 0; k < n; ++k)
        residual -= h.col(k) * alphabet.points[0];
    std::vector<int> best = digits;
    double best_metric = residual.squaredNorm();
    while (true)
    {
        Eigen::Index k = 0;
        for (; k < n; ++k)
        {
            const int from = digits[static_cast<std::size_t>(k)];
            const int to = from + 1 == na ? 0 : from + 1;
            digits[static_cast<std::size_t>(k)] = to;
            residual -= h.col(k) * (alphabet.points[static_cast<std::size_t>(to)] -
                                    alphabet.points[static_cast<std::size_t>(from)]);
            if (to != 0)
                break;
        }
        if (k == n)
            break;
        const double metric = residual.squaredNorm();
        if (metric < best_metric)
        {
            best_metric = metric;
            best = digits;
        }
    }
    return best;
}

} // namespace afdm
