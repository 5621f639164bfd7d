#pragma once

// Doubly selective channel: path synthesis, sample-level application with a
// chirp-periodic prefix, and the equivalent sparse DAFT-domain matrices.

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "afdm/daft.hpp"
#include "afdm/sparse.hpp"

namespace afdm {

/// One propagation path: complex gain, integer delay l and integer Doppler
/// index alpha = N * f (normalized Doppler f = alpha / N).
struct ChannelPath
{
    cplx gain{};
    int delay = 0;
    int doppler = 0;
};

struct ChannelRealization
{
    std::vector<ChannelPath> paths;
};

struct DelayDoppler
{
    int delay = 0;
    int doppler = 0;
    friend bool operator==(const DelayDoppler &, const DelayDoppler &) = default;
};

inline void validate(const ChannelRealization &ch, const AfdmConfig &cfg)
{
    if (ch.paths.empty())
        throw std::invalid_argument("ChannelRealization: at least one path required");
    if (static_cast<int>(ch.paths.size()) > cfg.grid_size())
        throw std::invalid_argument("ChannelRealization: more paths than delay/Doppler hypotheses");
    for (std::size_t i = 0; i < ch.paths.size(); ++i)
    {
        const auto &p = ch.paths[i];
        if (p.delay < 0 || p.delay > cfg.l_max)
            throw std::invalid_argument("ChannelRealization: delay " + std::to_string(p.delay) +
                                        " outside [0, l_max]");
        if (p.doppler < -cfg.alpha_max || p.doppler > cfg.alpha_max)
            throw std::invalid_argument("ChannelRealization: Doppler index " +
                                        std::to_string(p.doppler) + " outside [-alpha_max, alpha_max]");
        for (std::size_t j = 0; j < i; ++j)
            if (ch.paths[j].delay == p.delay)
                throw std::invalid_argument("ChannelRealization: duplicate delay index " +
                                            std::to_string(p.delay));
    }
}

/// Cyclic diagonal offset alpha + 2*N*c1*l of a path in the DAFT domain.
inline long path_loc(int delay, int doppler, const AfdmConfig &cfg)
{
    return doppler + cfg.c1_scaled * delay;
}

/// Maps the 1-based hypothesis index t in [1, Q+1] to its (delay, Doppler) pair.
inline DelayDoppler index_to_delay_doppler(int t, const AfdmConfig &cfg)
{
    if (t < 1 || t > cfg.grid_size())
        throw std::out_of_range("index_to_delay_doppler: t = " + std::to_string(t) +
                                " outside [1, " + std::to_string(cfg.grid_size()) + "]");
    if (cfg.c1_scaled <= 0)
        throw std::invalid_argument("index_to_delay_doppler: requires 2*N*c1 > 0");
    const long span = cfg.c1_scaled;
    return {static_cast<int>((t - 1) / span), static_cast<int>((t - 1) % span) - cfg.alpha_max};
}

/// Inverse of index_to_delay_doppler (1-based).
inline int delay_doppler_to_index(int delay, int doppler, const AfdmConfig &cfg)
{
    const long t = delay * cfg.c1_scaled + (doppler + cfg.alpha_max) + 1;
    if (t < 1 || t > cfg.grid_size() || doppler < -cfg.alpha_max || doppler > cfg.alpha_max)
        throw std::out_of_range("delay_doppler_to_index: pair outside the hypothesis grid");
    return static_cast<int>(t);
}

/// Unit-gain subchannel matrix of one (delay, Doppler) pair in sparse form:
/// entry (m, k) with k = (m + loc) mod N equals
///   exp(j*2*pi/N * (N*c1*l^2 - k*l + N*c2*(k^2 - m^2))).
inline CyclicDiagonal theta_matrix(int delay, int doppler, const AfdmConfig &cfg)
{
    if (delay < 0 || delay > cfg.l_max || doppler < -cfg.alpha_max || doppler > cfg.alpha_max)
        throw std::out_of_range("theta_matrix: (delay, doppler) = (" + std::to_string(delay) + ", " +
                                std::to_string(doppler) + ") outside configured bounds");
    const int n = cfg.n_subcarriers;
    const long period = 2L * n;
    CyclicDiagonal d;
    d.offset = wrap_index(path_loc(delay, doppler, cfg), n);
    d.coeff.resize(n);
    const long l = delay;
    const long chirp_term = (cfg.c1_scaled % period) * ((l * l) % period) % period;
    for (int m = 0; m < n; ++m)
    {
        const long k = wrap_index(static_cast<long>(m) + d.offset, n);
        // (N c1 l^2 - k l) / N = (c1_scaled l^2 - 2 k l) / (2N), reduced exactly.
        long num = (chirp_term - (2 * k * l) % period) % period;
        if (num < 0)
            num += period;
        const double c2_term =
            std::fmod(cfg.c2 * (static_cast<double>(k) * k - static_cast<double>(m) * m), 1.0);
        d.coeff[m] = std::polar(1.0, kTwoPi * (static_cast<double>(num) / period + c2_term));
    }
    return d;
}

/// Dense closed-form subchannel matrix (oracle/diagnostic use).
inline CMatrix theta_dense(int delay, int doppler, const AfdmConfig &cfg)
{
    SparseChannelMatrix m(cfg.n_subcarriers);
    m.add(theta_matrix(delay, doppler, cfg));
    return m.to_dense();
}

/// All Q+1 subchannel matrices in hypothesis order t = 1..Q+1 (vector index t-1).
inline std::vector<CyclicDiagonal> theta_table(const AfdmConfig &cfg)
{
    std::vector<CyclicDiagonal> out;
    out.reserve(cfg.grid_size());
    for (int t = 1; t <= cfg.grid_size(); ++t)
    {
        const auto dd = index_to_delay_doppler(t, cfg);
        out.push_back(theta_matrix(dd.delay, dd.doppler, cfg));
    }
    return out;
}

/// H_eff = sum_i h_i * Theta(l_i, alpha_i).
inline SparseChannelMatrix effective_matrix(const ChannelRealization &ch, const AfdmConfig &cfg)
{
    validate(ch, cfg);
    SparseChannelMatrix h(cfg.n_subcarriers);
    for (const auto &p : ch.paths)
        h.add(theta_matrix(p.delay, p.doppler, cfg), p.gain);
    return h;
}

/// Draws a channel with `p` paths: gains CN(0, 1/p), distinct delays chosen
/// uniformly from [0, l_max], Doppler indices uniform on [-alpha_max, alpha_max].
template <class Urbg>
ChannelRealization sample_channel(Urbg &rng, int p, const AfdmConfig &cfg)
{
    if (p < 1)
        throw std::invalid_argument("sample_channel: path count must be positive");
    if (p > cfg.l_max + 1)
        throw std::invalid_argument("sample_channel: " + std::to_string(p) +
                                    " paths need distinct delays but l_max + 1 = " +
                                    std::to_string(cfg.l_max + 1));
    std::vector<int> delays(cfg.l_max + 1);
    std::iota(delays.begin(), delays.end(), 0);
    std::shuffle(delays.begin(), delays.end(), rng);

    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / p));
    std::uniform_int_distribution<int> doppler(-cfg.alpha_max, cfg.alpha_max);
    ChannelRealization ch;
    ch.paths.reserve(p);
    for (int i = 0; i < p; ++i)
    {
        ChannelPath path;
        const double re = gauss(rng);
        const double im = gauss(rng);
        path.gain = {re, im};
        path.delay = delays[i];
        path.doppler = doppler(rng);
        ch.paths.push_back(path);
    }
    return ch;
}

/// Adds CN(0, n0) noise to every sample. A zero n0 leaves `v` (and the
/// generator) untouched.
template <class Urbg>
void add_awgn(CVector &v, double n0, Urbg &rng)
{
    if (n0 < 0.0)
        throw std::invalid_argument("add_awgn: noise power must be nonnegative");
    if (n0 == 0.0)
        return;
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * n0));
    for (auto &x : v)
    {
        const double re = gauss(rng);
        const double im = gauss(rng);
        x += cplx{re, im};
    }
}

/// Sample-by-sample channel: prepends an l_max-sample chirp-periodic prefix
///   s[-q] = s[N-q] * exp(-j*2*pi*c1*(N^2 - 2*N*q)),
/// applies r[n] = sum_i h_i exp(-j*2*pi*alpha_i*n/N) s[n - l_i], drops the
/// prefix and adds CN(0, n0) noise.
template <class Urbg>
CVector apply_time_domain(const CVector &s, const ChannelRealization &ch, const AfdmConfig &cfg,
                          double n0, Urbg &rng)
{
    detail::check_length(s.size(), cfg, "apply_time_domain");
    validate(ch, cfg);
    const int n = cfg.n_subcarriers;
    const int prefix = cfg.l_max;
    const long period = 2L * n;

    // ext[prefix + i] holds s[i] for i in [-prefix, N).
    CVector ext(prefix + n);
    ext.tail(n) = s;
    for (int q = 1; q <= prefix; ++q)
    {
        // c1 * (N^2 - 2 N q) = c1_scaled * (N - 2q) / 2
        long num = (cfg.c1_scaled % period) * ((static_cast<long>(n) - 2 * q) % period) % period;
        if (num < 0)
            num += period;
        // phase = -2*pi * num / 2
        ext[prefix - q] = s[n - q] * std::polar(1.0, -kTwoPi * static_cast<double>(num) / 2.0);
    }

    CVector r = CVector::Zero(n);
    for (const auto &p : ch.paths)
    {
        for (int i = 0; i < n; ++i)
        {
            const long e = wrap_index(static_cast<long>(p.doppler) * i, n);
            const cplx doppler = std::polar(1.0, -kTwoPi * static_cast<double>(e) / n);
            r[i] += p.gain * doppler * ext[prefix + i - p.delay];
        }
    }
    add_awgn(r, n0, rng);
    return r;
}

} // namespace afdm
