#pragma once

// Discrete affine Fourier transform (DAFT) pair and AFDM chirp parameters.
//
// Forward transform:  y = Lambda_c2 * F * Lambda_c1 * r
// Inverse transform:  s = Lambda_c1^H * F^H * Lambda_c2^H * x
//
// with Lambda_c = diag(exp(-j*2*pi*c*n^2)), n = 0..N-1, and F the unitary
// (1/sqrt(N)) DFT matrix. Both directions run as chirp -> FFT -> chirp.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace afdm {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// A length-N vector in the DAFT domain (data, pilot or received).
using DaftFrame = CVector;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Frame and chirp parameters of one AFDM link.
///
/// c1 is kept as the integer `c1_scaled = 2*N*c1` so that the delay/Doppler
/// index maps stay exact; `c1()` returns the real value.
struct AfdmConfig
{
    int n_subcarriers = 0;   // N
    int alpha_max = 0;       // maximum Doppler index
    int l_max = 0;           // maximum delay index
    long c1_scaled = 0;      // 2*N*c1
    double c2 = 0.0;
    int bits_per_symbol = 2; // QPSK

    double c1() const { return static_cast<double>(c1_scaled) / (2.0 * n_subcarriers); }

    /// Number of delay/Doppler hypotheses, (l_max+1)(2*alpha_max+1).
    int grid_size() const { return (l_max + 1) * (2 * alpha_max + 1); }
};

/// (sqrt(5)-1)/2 / (2N); a fixed irrational stand-in for the free c2 parameter.
inline double default_c2(int n)
{
    return (std::sqrt(5.0) - 1.0) / 2.0 / (2.0 * n);
}

/// Throws std::invalid_argument when the configuration cannot carry a frame.
inline void validate(const AfdmConfig &cfg)
{
    if (cfg.n_subcarriers <= 0)
        throw std::invalid_argument("AfdmConfig: n_subcarriers must be positive");
    if (cfg.alpha_max < 0 || cfg.l_max < 0)
        throw std::invalid_argument("AfdmConfig: alpha_max and l_max must be nonnegative");
    if (cfg.l_max >= cfg.n_subcarriers)
        throw std::invalid_argument("AfdmConfig: l_max must be smaller than n_subcarriers");
    if (static_cast<long>(cfg.l_max + 1) * (2 * cfg.alpha_max + 1) > cfg.n_subcarriers)
        throw std::invalid_argument("AfdmConfig: (l_max+1)(2*alpha_max+1) = " +
                                    std::to_string(cfg.grid_size()) + " exceeds n_subcarriers = " +
                                    std::to_string(cfg.n_subcarriers));
    if (cfg.c1_scaled < 0)
        throw std::invalid_argument("AfdmConfig: c1 must be nonnegative");
    if (!std::isfinite(cfg.c2))
        throw std::invalid_argument("AfdmConfig: c2 must be finite");
    if (cfg.bits_per_symbol <= 0)
        throw std::invalid_argument("AfdmConfig: bits_per_symbol must be positive");
}

/// Builds the standard configuration: c1 = (2*alpha_max+1)/(2N), c2 = default_c2(N).
inline AfdmConfig default_params(int n, int alpha_max, int l_max)
{
    AfdmConfig cfg;
    cfg.n_subcarriers = n;
    cfg.alpha_max = alpha_max;
    cfg.l_max = l_max;
    cfg.c1_scaled = 2L * alpha_max + 1;
    cfg.c2 = n > 0 ? default_c2(n) : 0.0;
    cfg.bits_per_symbol = 2;
    validate(cfg);
    return cfg;
}

namespace detail {

// exp(-j*2*pi*c*n^2) for n = 0..N-1.
inline CVector chirp(int n, double c)
{
    CVector out(n);
    for (int i = 0; i < n; ++i)
    {
        const double sq = static_cast<double>(i) * i;
        out[i] = std::polar(1.0, -kTwoPi * std::fmod(c * sq, 1.0));
    }
    return out;
}

// Same chirp for c = c1 = c1_scaled/(2N), with the exponent reduced exactly.
inline CVector c1_chirp(const AfdmConfig &cfg)
{
    const long n = cfg.n_subcarriers;
    const long period = 2 * n;
    CVector out(n);
    for (long i = 0; i < n; ++i)
    {
        const long num = (cfg.c1_scaled % period) * ((i * i) % period) % period;
        out[i] = std::polar(1.0, -kTwoPi * static_cast<double>(num) / static_cast<double>(period));
    }
    return out;
}

inline void check_length(Eigen::Index len, const AfdmConfig &cfg, const char *what)
{
    if (len != cfg.n_subcarriers)
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(cfg.n_subcarriers) + ", got " +
                                    std::to_string(len));
}

} // namespace detail

/// Reusable DAFT engine for one configuration. Holds the chirp tables and an
/// FFT plan; not safe for concurrent calls on the same instance (the FFT plan
/// cache is mutated), so give each worker its own copy.
class Daft
{
  public:
    explicit Daft(const AfdmConfig &cfg)
        : cfg_(cfg), chirp1_(detail::c1_chirp(cfg)), chirp2_(detail::chirp(cfg.n_subcarriers, cfg.c2)),
          scale_(1.0 / std::sqrt(static_cast<double>(cfg.n_subcarriers)))
    {
        validate(cfg);
        fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    }

    const AfdmConfig &config() const { return cfg_; }

    /// Time domain -> DAFT domain.
    DaftFrame forward(const CVector &r)
    {
        detail::check_length(r.size(), cfg_, "daft");
        buf_ = r.cwiseProduct(chirp1_);
        fft_.fwd(out_, buf_);
        return (out_.cwiseProduct(chirp2_) * scale_).eval();
    }

    /// DAFT domain -> time domain.
    CVector inverse(const DaftFrame &x)
    {
        detail::check_length(x.size(), cfg_, "idaft");
        buf_ = x.cwiseProduct(chirp2_.conjugate());
        // Unscaled inverse is N * F^{-1}, i.e. sqrt(N) * F^H in unitary terms.
        fft_.inv(out_, buf_);
        return (out_.cwiseProduct(chirp1_.conjugate()) * scale_).eval();
    }

  private:
    AfdmConfig cfg_;
    CVector chirp1_;
    CVector chirp2_;
    double scale_;
    Eigen::FFT<double> fft_;
    CVector buf_;
    CVector out_;
};

/// s = Lambda_c1^H F^H Lambda_c2^H x
inline CVector idaft(const DaftFrame &x, const AfdmConfig &cfg)
{
    Daft t(cfg);
    return t.inverse(x);
}

/// y = Lambda_c2 F Lambda_c1 r
inline DaftFrame daft(const CVector &r, const AfdmConfig &cfg)
{
    Daft t(cfg);
    return t.forward(r);
}

/// Dense unitary DFT matrix, F(m,n) = exp(-j*2*pi*m*n/N) / sqrt(N).
inline CMatrix dft_matrix(int n)
{
    CMatrix f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k)
        {
            const long e = (static_cast<long>(m) * k) % n;
            f(m, k) = std::polar(scale, -kTwoPi * static_cast<double>(e) / n);
        }
    return f;
}

/// Dense forward DAFT matrix Lambda_c2 F Lambda_c1 (direct path, O(N^2) apply).
inline CMatrix daft_matrix(const AfdmConfig &cfg)
{
    validate(cfg);
    const CVector l1 = detail::c1_chirp(cfg);
    const CVector l2 = detail::chirp(cfg.n_subcarriers, cfg.c2);
    return l2.asDiagonal() * dft_matrix(cfg.n_subcarriers) * l1.asDiagonal();
}

} // namespace afdm
