#pragma once

// Superimposed pilot grid in the DAFT domain.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "afdm/daft.hpp"

namespace afdm {

/// Guard width Q = (l_max+1)(2*alpha_max+1) - 1.
inline int guard_q(const AfdmConfig &cfg)
{
    return cfg.grid_size() - 1;
}

/// Largest pilot count M+1 with M*(Q+1) < N - Q.
inline int max_pilot_count(const AfdmConfig &cfg)
{
    const int q = guard_q(cfg);
    const int n = cfg.n_subcarriers;
    // M*(Q+1) <= N - Q - 1
    return (n - q - 1) / (q + 1) + 1;
}

/// M+1 pilots of total energy `pilot_power` (sigma_p^2) at `indices`.
struct PilotConfig
{
    int pilot_count = 1;
    double pilot_power = 0.0;
    int guard = 0;
    std::vector<int> indices;
};

/// Pilots at {0, Q+1, ..., M(Q+1)}.
inline PilotConfig make_pilot_config(const AfdmConfig &cfg, int pilot_count, double pilot_power)
{
    if (pilot_count < 1)
        throw std::invalid_argument("make_pilot_config: pilot_count must be positive");
    PilotConfig pc;
    pc.pilot_count = pilot_count;
    pc.pilot_power = pilot_power;
    pc.guard = guard_q(cfg);
    pc.indices.reserve(pilot_count);
    for (int m = 0; m < pilot_count; ++m)
        pc.indices.push_back(m * (pc.guard + 1));
    return pc;
}

/// Each pilot must have at least Q zeros on both sides, cyclically, with the
/// first pilot at index 0.
inline void validate(const PilotConfig &pc, const AfdmConfig &cfg)
{
    const int n = cfg.n_subcarriers;
    if (pc.pilot_count < 1 || static_cast<int>(pc.indices.size()) != pc.pilot_count)
        throw std::invalid_argument("PilotConfig: pilot_count must equal the number of indices");
    if (!(pc.pilot_power >= 0.0) || !std::isfinite(pc.pilot_power))
        throw std::invalid_argument("PilotConfig: pilot_power must be a finite nonnegative value");
    if (pc.guard < 0)
        throw std::invalid_argument("PilotConfig: guard must be nonnegative");
    if (pc.indices.front() != 0)
        throw std::invalid_argument("PilotConfig: first pilot must sit at index 0");
    const int step = pc.guard + 1;
    for (std::size_t i = 1; i < pc.indices.size(); ++i)
        if (pc.indices[i] - pc.indices[i - 1] < step)
            throw std::invalid_argument("PilotConfig: pilots " + std::to_string(pc.indices[i - 1]) +
                                        " and " + std::to_string(pc.indices[i]) +
                                        " are closer than Q+1");
    if (pc.indices.back() >= n - pc.guard)
        throw std::invalid_argument("PilotConfig: last pilot at " + std::to_string(pc.indices.back()) +
                                    " violates M(Q+1) < N - Q with N = " + std::to_string(n) +
                                    ", Q = " + std::to_string(pc.guard));
}

/// Real-valued pilot vector, sigma_p / sqrt(M+1) at each pilot index.
inline DaftFrame build_pilot_vector(const PilotConfig &pc, const AfdmConfig &cfg)
{
    validate(pc, cfg);
    DaftFrame x = DaftFrame::Zero(cfg.n_subcarriers);
    const double amp = std::sqrt(pc.pilot_power / pc.pilot_count);
    for (int idx : pc.indices)
        x[idx] = amp;
    return x;
}

/// x = x_p + x_d
inline DaftFrame superimpose(const DaftFrame &pilot, const DaftFrame &data)
{
    if (pilot.size() != data.size())
        throw std::invalid_argument("superimpose: pilot and data lengths differ");
    return pilot + data;
}

} // namespace afdm
