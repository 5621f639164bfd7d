#pragma once

// Iterative channel estimation and data detection.
//
// Iteration 1 estimates h from the raw frame. Iteration i+1 re-estimates from
// y - H^i x_d^i (data interference removed with the previous estimate and
// decisions), re-thresholds, and detects the data from y - H^{i+1} x_p.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "afdm/channel.hpp"
#include "afdm/detection.hpp"
#include "afdm/estimation.hpp"
#include "afdm/pilot.hpp"

namespace afdm {

struct DetectorParams
{
    MpParams mp;
    // Re-synthesize data interference from posterior means instead of hard decisions.
    bool soft_remodulation = true;
    // Add the expected pilot-cancellation error to the detector's per-row noise.
    bool account_estimation_error = true;
};

struct ReceiverParams
{
    int max_iters = 2;
    double stop_tolerance = 1e-6; // on max |h^{i+1} - h^i|
    double threshold_multiplier = 3.0;
    DetectorParams detector;
};

struct IterationRecord
{
    CVector h_hat;
    BitVector indicators;
    std::vector<int> decisions; // empty when no data is carried
    double residual_norm = 0.0; // ||y - H_hat (x_p + x_d_hat)||
    bool detector_converged = true;
};

struct ReceiverReport
{
    double threshold = 0.0;
    std::vector<IterationRecord> iterations;

    int iteration_count() const { return static_cast<int>(iterations.size()); }
    const IterationRecord &final() const { return iterations.back(); }
};

/// Everything that depends only on the link configuration: pilot vector,
/// subchannel table, Phi_p and the estimator. Built once, then shared
/// read-only by every frame.
class ReceiverContext
{
  public:
    ReceiverContext(const AfdmConfig &cfg, const PilotConfig &pilots, ChannelPrior prior, double sigma_d2,
                    double n0, double threshold_multiplier = 3.0, SymbolAlphabet alphabet = qpsk())
        : cfg_(cfg), pilots_(pilots), pilot_(build_pilot_vector(pilots, cfg)), thetas_(theta_table(cfg)),
          sigma_d2_(sigma_d2), n0_(n0), alphabet_(std::move(alphabet)),
          estimator_(build_phi_p(pilot_, thetas_), prior,
                     effective_noise_variance(prior_for_noise(prior), sigma_d2, n0))
    {
        if (!(n0 > 0.0))
            throw std::invalid_argument("ReceiverContext: receiver noise power must be positive");
        threshold_ = default_threshold(estimator_.sigma_w2(), pilots.pilot_power, threshold_multiplier);
        data_alphabet_ = scaled(alphabet_, std::sqrt(sigma_d2_));
        // Row m of H_hat x_p is off by sum_t (h_t - h_hat_t) (Theta_t x_p)_m; with the
        // first-pass posterior variances this gives the residual pilot power per row.
        const Eigen::VectorXd v =
            posterior_covariance(estimator_.phi(), estimator_.prior(), estimator_.sigma_w2()).diagonal().real();
        pilot_leakage_ = estimator_.phi().cwiseAbs2() * v;
    }

    const AfdmConfig &config() const { return cfg_; }
    const PilotConfig &pilot_config() const { return pilots_; }
    const DaftFrame &pilot() const { return pilot_; }
    const std::vector<CyclicDiagonal> &thetas() const { return thetas_; }
    const MmseEstimator &estimator() const { return estimator_; }
    const SymbolAlphabet &alphabet() const { return alphabet_; }
    const SymbolAlphabet &data_alphabet() const { return data_alphabet_; }
    double sigma_d2() const { return sigma_d2_; }
    double n0() const { return n0_; }
    double threshold() const { return threshold_; }
    /// Expected |((H - H_hat) x_p)_m|^2 after first-pass estimation.
    const Eigen::VectorXd &pilot_leakage() const { return pilot_leakage_; }

  private:
    static const ChannelPrior &prior_for_noise(const ChannelPrior &p)
    {
        validate(p);
        return p;
    }

    AfdmConfig cfg_;
    PilotConfig pilots_;
    DaftFrame pilot_;
    std::vector<CyclicDiagonal> thetas_;
    double sigma_d2_;
    double n0_;
    SymbolAlphabet alphabet_;
    SymbolAlphabet data_alphabet_;
    MmseEstimator estimator_;
    double threshold_ = 0.0;
    Eigen::VectorXd pilot_leakage_;
};

inline ReceiverReport run_receiver(const DaftFrame &y, const ReceiverContext &ctx, const ReceiverParams &params)
{
    const int n = ctx.config().n_subcarriers;
    detail::check_length(y.size(), ctx.config(), "run_receiver");
    if (params.max_iters < 1)
        throw std::invalid_argument("run_receiver: max_iters must be positive");

    const bool has_data = ctx.sigma_d2() > 0.0;
    ReceiverReport report;
    report.threshold = ctx.threshold();
    report.iterations.reserve(static_cast<std::size_t>(params.max_iters));

    const Eigen::VectorXd noise = params.detector.account_estimation_error
                                      ? Eigen::VectorXd((ctx.pilot_leakage().array() + ctx.n0()).matrix())
                                      : Eigen::VectorXd::Constant(n, ctx.n0());
    DaftFrame data_hat = DaftFrame::Zero(n);
    SparseChannelMatrix h_prev(n);
    for (int i = 1; i <= params.max_iters; ++i)
    {
        IterationRecord rec;
        const DaftFrame target = i == 1 ? y : DaftFrame(y - h_prev.apply(data_hat));
        rec.h_hat = ctx.estimator().estimate(target);
        rec.indicators = threshold_paths(rec.h_hat, ctx.threshold());
        SparseChannelMatrix h_hat = assemble_h_eff(rec.h_hat, rec.indicators, ctx.thetas());

        if (has_data)
        {
            const DaftFrame y_d = cancel_pilots(y, h_hat, ctx.pilot());
            const MpResult mp = mp_detect(y_d, h_hat, ctx.data_alphabet(), noise, params.detector.mp);
            rec.decisions = mp.decisions;
            rec.detector_converged = mp.converged;
            if (params.detector.soft_remodulation)
            {
                const auto &pts = ctx.data_alphabet().points;
                for (int k = 0; k < n; ++k)
                {
                    cplx mean = 0.0;
                    for (std::size_t a = 0; a < pts.size(); ++a)
                        mean += mp.posteriors(k, static_cast<Eigen::Index>(a)) * pts[a];
                    data_hat[k] = mean;
                }
            }
            else
            {
                data_hat = symbols_from_indices(mp.decisions, ctx.data_alphabet());
            }
        }
        rec.residual_norm = (y - h_hat.apply(ctx.pilot() + data_hat)).norm();

        const bool settled = i > 1 && (rec.h_hat - report.iterations.back().h_hat).cwiseAbs().maxCoeff() <
                                          params.stop_tolerance;
        report.iterations.push_back(std::move(rec));
        if (settled)
            break;
        h_prev = std::move(h_hat);
    }
    return report;
}

/// Convenience overload that builds the per-configuration context for a single frame.
inline ReceiverReport run_receiver(const DaftFrame &y, const PilotConfig &pilots, const ChannelPrior &prior,
                                   const AfdmConfig &cfg, double sigma_d2, double n0,
                                   const ReceiverParams &params)
{
    ReceiverContext ctx(cfg, pilots, prior, sigma_d2, n0, params.threshold_multiplier);
    return run_receiver(y, ctx, params);
}

} // namespace afdm
