#pragma once

// MMSE channel estimation from a superimposed-pilot frame.
//
// Over the Q+1 delay/Doppler hypotheses the received frame is
//   y = Phi_p h + Phi_d h + w,   Phi_p = [Theta_1 x_p, ..., Theta_{Q+1} x_p],
// and the data term Phi_d h + w is treated as white noise of variance
//   sigma_w^2 = (sum_t sigma_ht^2) sigma_d^2 + N0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "afdm/channel.hpp"
#include "afdm/pilot.hpp"
#include "afdm/sparse.hpp"

namespace afdm {

using BitVector = std::vector<std::uint8_t>;

/// Diagonal prior covariance C_h of the (Q+1)-vector h.
struct ChannelPrior
{
    Eigen::VectorXd variances;
};

inline void validate(const ChannelPrior &prior)
{
    if (prior.variances.size() == 0)
        throw std::invalid_argument("ChannelPrior: empty");
    for (Eigen::Index i = 0; i < prior.variances.size(); ++i)
        if (!(prior.variances[i] > 0.0))
            throw std::invalid_argument("ChannelPrior: variance " + std::to_string(i) +
                                        " must be positive");
}

/// Equal variance 1/(Q+1) on every hypothesis (unit total channel power).
inline ChannelPrior uniform_prior(const AfdmConfig &cfg)
{
    const int size = cfg.grid_size();
    return {Eigen::VectorXd::Constant(size, 1.0 / size)};
}

struct EstimationResult
{
    CVector h_hat;
    BitVector indicators;
    double threshold = 0.0;
};

inline CMatrix build_phi_p(const DaftFrame &pilot, const std::vector<CyclicDiagonal> &thetas)
{
    const auto n = pilot.size();
    CMatrix phi(n, static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t t = 0; t < thetas.size(); ++t)
    {
        if (thetas[t].coeff.size() != n)
            throw std::invalid_argument("build_phi_p: theta/pilot length mismatch");
        SparseChannelMatrix m(static_cast<int>(n));
        m.add(thetas[t]);
        phi.col(static_cast<Eigen::Index>(t)) = m.apply(pilot);
    }
    return phi;
}

/// Column t is Theta_t x_p, t = 1..Q+1.
inline CMatrix build_phi_p(const DaftFrame &pilot, const AfdmConfig &cfg)
{
    detail::check_length(pilot.size(), cfg, "build_phi_p");
    return build_phi_p(pilot, theta_table(cfg));
}

/// (sum_t sigma_ht^2) * sigma_d^2 + N0
inline double effective_noise_variance(const ChannelPrior &prior, double sigma_d2, double n0)
{
    if (sigma_d2 < 0.0 || n0 < 0.0)
        throw std::invalid_argument("effective_noise_variance: powers must be nonnegative");
    return prior.variances.sum() * sigma_d2 + n0;
}

namespace detail {

inline void check_mmse_inputs(const CMatrix &phi, const ChannelPrior &prior, double sigma_w2)
{
    validate(prior);
    if (!(sigma_w2 > 0.0))
        throw std::invalid_argument("mmse_estimate: effective noise variance must be positive");
    if (phi.cols() != prior.variances.size())
        throw std::invalid_argument("mmse_estimate: prior size does not match Phi_p columns");
}

} // namespace detail

/// (Phi^H Phi / sigma_w2 + C_h^{-1})^{-1}, the error covariance of the estimate.
inline CMatrix posterior_covariance(const CMatrix &phi, const ChannelPrior &prior, double sigma_w2)
{
    detail::check_mmse_inputs(phi, prior, sigma_w2);
    CMatrix a = phi.adjoint() * phi / sigma_w2;
    a.diagonal() += prior.variances.cwiseInverse().cast<cplx>();
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("posterior_covariance: system is not positive definite");
    return llt.solve(CMatrix::Identity(a.rows(), a.cols()));
}

/// General route: h = (Phi^H Phi / s + C_h^{-1})^{-1} Phi^H y / s via Cholesky.
inline CVector mmse_estimate_general(const DaftFrame &y, const CMatrix &phi, const ChannelPrior &prior,
                                     double sigma_w2)
{
    detail::check_mmse_inputs(phi, prior, sigma_w2);
    if (y.size() != phi.rows())
        throw std::invalid_argument("mmse_estimate: y length does not match Phi_p rows");
    CMatrix a = phi.adjoint() * phi / sigma_w2;
    a.diagonal() += prior.variances.cwiseInverse().cast<cplx>();
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("mmse_estimate: system is not positive definite");
    return llt.solve(phi.adjoint() * y / sigma_w2);
}

/// Per-entry route, valid when Phi^H Phi is diagonal:
///   h_t = (g_t / s + 1 / sigma_ht^2)^{-1} (Phi^H y)_t / s,  g_t = ||Theta_t x_p||^2.
inline CVector mmse_estimate_diagonal(const DaftFrame &y, const CMatrix &phi, const ChannelPrior &prior,
                                      double sigma_w2)
{
    detail::check_mmse_inputs(phi, prior, sigma_w2);
    if (y.size() != phi.rows())
        throw std::invalid_argument("mmse_estimate: y length does not match Phi_p rows");
    const CVector corr = phi.adjoint() * y;
    CVector h(phi.cols());
    for (Eigen::Index t = 0; t < phi.cols(); ++t)
    {
        const double gain = phi.col(t).squaredNorm();
        h[t] = corr[t] / sigma_w2 / (gain / sigma_w2 + 1.0 / prior.variances[t]);
    }
    return h;
}

/// True when every off-diagonal entry of Phi^H Phi is negligible relative to its diagonal.
inline bool has_orthogonal_columns(const CMatrix &phi, double rel_tol = 1e-9)
{
    const CMatrix gram = phi.adjoint() * phi;
    const double scale = gram.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < gram.rows(); ++i)
        for (Eigen::Index j = 0; j < gram.cols(); ++j)
            if (i != j && std::abs(gram(i, j)) > rel_tol * std::max(scale, 1e-300))
                return false;
    return true;
}

/// Estimator bound to one pilot grid and noise level. Chooses the per-entry
/// route when Phi_p has orthogonal columns and Cholesky otherwise; read-only
/// after construction.
class MmseEstimator
{
  public:
    MmseEstimator(CMatrix phi, ChannelPrior prior, double sigma_w2)
        : phi_(std::move(phi)), prior_(std::move(prior)), sigma_w2_(sigma_w2)
    {
        detail::check_mmse_inputs(phi_, prior_, sigma_w2_);
        diagonal_ = has_orthogonal_columns(phi_);
        if (diagonal_)
        {
            scale_.resize(phi_.cols());
            for (Eigen::Index t = 0; t < phi_.cols(); ++t)
                scale_[t] = 1.0 / sigma_w2_ / (phi_.col(t).squaredNorm() / sigma_w2_ + 1.0 / prior_.variances[t]);
        }
        else
        {
            CMatrix a = phi_.adjoint() * phi_ / sigma_w2_;
            a.diagonal() += prior_.variances.cwiseInverse().cast<cplx>();
            llt_.compute(a);
            if (llt_.info() != Eigen::Success)
                throw std::runtime_error("MmseEstimator: system is not positive definite");
        }
    }

    CVector estimate(const DaftFrame &y) const
    {
        if (y.size() != phi_.rows())
            throw std::invalid_argument("MmseEstimator: y length does not match Phi_p rows");
        if (diagonal_)
            return (phi_.adjoint() * y).cwiseProduct(scale_.cast<cplx>());
        return llt_.solve(phi_.adjoint() * y / sigma_w2_);
    }

    bool uses_diagonal_route() const { return diagonal_; }
    const CMatrix &phi() const { return phi_; }
    const ChannelPrior &prior() const { return prior_; }
    double sigma_w2() const { return sigma_w2_; }

  private:
    CMatrix phi_;
    ChannelPrior prior_;
    double sigma_w2_;
    bool diagonal_ = false;
    Eigen::VectorXd scale_;
    Eigen::LLT<CMatrix> llt_;
};

/// MMSE estimate of the (Q+1)-vector h; picks the per-entry route when valid.
inline CVector mmse_estimate(const DaftFrame &y, const CMatrix &phi, const ChannelPrior &prior,
                             double sigma_w2)
{
    if (has_orthogonal_columns(phi))
        return mmse_estimate_diagonal(y, phi, prior, sigma_w2);
    return mmse_estimate_general(y, phi, prior, sigma_w2);
}

/// 3 * sqrt(sigma_w2 / sigma_p2)
inline double default_threshold(double sigma_w2, double sigma_p2, double multiplier = 3.0)
{
    if (!(sigma_p2 > 0.0))
        throw std::invalid_argument("default_threshold: pilot power must be positive");
    if (sigma_w2 < 0.0)
        throw std::invalid_argument("default_threshold: noise variance must be nonnegative");
    return multiplier * std::sqrt(sigma_w2 / sigma_p2);
}

/// b_t = 1 iff |h_t| > gamma
inline BitVector threshold_paths(const CVector &h_hat, double gamma)
{
    if (gamma < 0.0)
        throw std::invalid_argument("threshold_paths: threshold must be nonnegative");
    BitVector b(static_cast<std::size_t>(h_hat.size()));
    for (Eigen::Index t = 0; t < h_hat.size(); ++t)
        b[static_cast<std::size_t>(t)] = std::abs(h_hat[t]) > gamma ? 1 : 0;
    return b;
}

inline SparseChannelMatrix assemble_h_eff(const CVector &h_hat, const BitVector &b,
                                          const std::vector<CyclicDiagonal> &thetas)
{
    if (static_cast<std::size_t>(h_hat.size()) != b.size() || b.size() != thetas.size())
        throw std::invalid_argument("assemble_h_eff: h_hat, indicators and theta table sizes differ");
    const int n = thetas.empty() ? 0 : static_cast<int>(thetas.front().coeff.size());
    SparseChannelMatrix h(n);
    for (std::size_t t = 0; t < b.size(); ++t)
        if (b[t])
            h.add(thetas[t], h_hat[static_cast<Eigen::Index>(t)]);
    return h;
}

/// H_eff estimate = sum_t b_t h_t Theta_t
inline SparseChannelMatrix assemble_h_eff(const CVector &h_hat, const BitVector &b, const AfdmConfig &cfg)
{
    if (h_hat.size() != cfg.grid_size())
        throw std::invalid_argument("assemble_h_eff: h_hat must have Q+1 entries");
    return assemble_h_eff(h_hat, b, theta_table(cfg));
}

/// The true channel on the (Q+1)-hypothesis grid (zeros where no path exists).
inline CVector channel_on_grid(const ChannelRealization &ch, const AfdmConfig &cfg)
{
    CVector h = CVector::Zero(cfg.grid_size());
    for (const auto &p : ch.paths)
        h[delay_doppler_to_index(p.delay, p.doppler, cfg) - 1] += p.gain;
    return h;
}

} // namespace afdm
