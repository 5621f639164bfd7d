#include <random>

#include <gtest/gtest.h>

#include "afdm/detection.hpp"
#include "afdm/pilot.hpp"

using namespace afdm;

TEST(GuardQ, Values)
{
    EXPECT_EQ(guard_q(default_params(512, 2, 2)), 14);
    EXPECT_EQ(guard_q(default_params(8, 0, 0)), 0);
    EXPECT_EQ(guard_q(default_params(32, 1, 1)), 5);
}

TEST(MaxPilotCount, Values)
{
    EXPECT_EQ(max_pilot_count(default_params(512, 2, 2)), 34);
    EXPECT_EQ(max_pilot_count(default_params(64, 2, 2)), 4);
    EXPECT_EQ(max_pilot_count(default_params(15, 2, 2)), 1);
    EXPECT_EQ(max_pilot_count(default_params(1, 0, 0)), 1);
}

TEST(MaxPilotCount, IsTheLargestLegalCount)
{
    for (int n : {15, 16, 29, 30, 31, 64, 100, 512})
    {
        const AfdmConfig cfg = default_params(n, 2, 2);
        const int m = max_pilot_count(cfg);
        EXPECT_NO_THROW(build_pilot_vector(make_pilot_config(cfg, m, 1.0), cfg));
        EXPECT_THROW(build_pilot_vector(make_pilot_config(cfg, m + 1, 1.0), cfg), std::invalid_argument);
    }
}

TEST(PilotVector, TwoPilots)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const DaftFrame x = build_pilot_vector(make_pilot_config(cfg, 2, 1.0), cfg);
    for (int i = 0; i < 64; ++i)
    {
        if (i == 0 || i == 15)
            EXPECT_DOUBLE_EQ(x[i].real(), 1.0 / std::sqrt(2.0));
        else
            EXPECT_EQ(x[i], cplx(0.0));
        EXPECT_EQ(x[i].imag(), 0.0);
    }
}

TEST(PilotVector, SinglePilot)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const DaftFrame x = build_pilot_vector(make_pilot_config(cfg, 1, 1.0), cfg);
    EXPECT_EQ(x[0], cplx(1.0));
    EXPECT_EQ(x.squaredNorm(), 1.0);
}

TEST(PilotVector, PlacementBeyondGuardRejected)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    EXPECT_THROW(build_pilot_vector(make_pilot_config(cfg, 5, 1.0), cfg), std::invalid_argument);

    PilotConfig tight = make_pilot_config(cfg, 2, 1.0);
    tight.indices = {0, 14};
    EXPECT_THROW(build_pilot_vector(tight, cfg), std::invalid_argument);

    PilotConfig shifted = make_pilot_config(cfg, 1, 1.0);
    shifted.indices = {3};
    EXPECT_THROW(build_pilot_vector(shifted, cfg), std::invalid_argument);

    PilotConfig wider = make_pilot_config(cfg, 2, 1.0);
    wider.indices = {0, 20};
    EXPECT_NO_THROW(build_pilot_vector(wider, cfg));
}

// Every legal grid: total energy sigma_p^2 and at least Q cyclic zeros around each pilot.
TEST(PilotVector, EnergyAndGuardsForEveryLegalCount)
{
    for (int n : {64, 100, 512})
    {
        const AfdmConfig cfg = default_params(n, 2, 2);
        const int q = guard_q(cfg);
        for (int count = 1; count <= max_pilot_count(cfg); ++count)
        {
            for (double power : {1.0, 3.5, 1e5})
            {
                const DaftFrame x = build_pilot_vector(make_pilot_config(cfg, count, power), cfg);
                EXPECT_NEAR(x.squaredNorm(), power, 1e-12 * power);
                for (int i = 0; i < n; ++i)
                {
                    if (x[i] == cplx(0.0))
                        continue;
                    for (int d = 1; d <= q; ++d)
                    {
                        EXPECT_EQ(x[(i + d) % n], cplx(0.0));
                        EXPECT_EQ(x[(i - d + n) % n], cplx(0.0));
                    }
                }
            }
        }
    }
}

TEST(Superimpose, Identities)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const DaftFrame p = build_pilot_vector(make_pilot_config(cfg, 3, 2.0), cfg);
    std::mt19937_64 rng(1);
    BitVector bits(128);
    for (auto &b : bits)
        b = rng() & 1;
    const DaftFrame d = modulate_bits(bits, qpsk(), 1.5);
    EXPECT_EQ(superimpose(p, DaftFrame::Zero(64)), p);
    EXPECT_EQ(superimpose(DaftFrame::Zero(64), d), d);
    EXPECT_THROW(superimpose(p, DaftFrame::Zero(63)), std::invalid_argument);
}

TEST(Superimpose, EnergiesAddInExpectation)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const double sigma_p2 = 5.0;
    const double sigma_d2 = 2.0;
    const DaftFrame p = build_pilot_vector(make_pilot_config(cfg, 4, sigma_p2), cfg);
    std::mt19937_64 rng(2);
    BitVector bits(128);
    double sum = 0.0;
    const int frames = 10000;
    for (int f = 0; f < frames; ++f)
    {
        for (auto &b : bits)
            b = rng() & 1;
        sum += superimpose(p, modulate_bits(bits, qpsk(), std::sqrt(sigma_d2))).squaredNorm();
    }
    const double expected = sigma_p2 + 64 * sigma_d2;
    EXPECT_NEAR(sum / frames, expected, 0.05 * expected);
}
