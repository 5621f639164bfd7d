#include <random>

#include <gtest/gtest.h>

#include "afdm/channel.hpp"
#include "afdm/detection.hpp"
#include "oracles.hpp"

using namespace afdm;

namespace {

BitVector random_bits(std::mt19937_64 &rng, std::size_t count)
{
    BitVector bits(count);
    for (auto &b : bits)
        b = rng() & 1;
    return bits;
}

std::vector<int> random_indices(std::mt19937_64 &rng, int n, int na)
{
    std::uniform_int_distribution<int> u(0, na - 1);
    std::vector<int> idx(n);
    for (auto &i : idx)
        i = u(rng);
    return idx;
}

SparseChannelMatrix identity(int n)
{
    SparseChannelMatrix h(n);
    h.add({0, CVector::Ones(n)});
    return h;
}

} // namespace

TEST(Qpsk, GrayMapping)
{
    const auto a = qpsk();
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_EQ(a.bits_per_symbol, 2);
    const DaftFrame x = modulate_bits({0, 0, 0, 1, 1, 0, 1, 1}, a, 2.0);
    EXPECT_NEAR(std::abs(x[0] - 2.0 * cplx(r, r)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(x[1] - 2.0 * cplx(r, -r)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(x[2] - 2.0 * cplx(-r, r)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(x[3] - 2.0 * cplx(-r, -r)), 0.0, 1e-15);
    // Nearest neighbours differ in exactly one bit.
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            if (i != j && std::abs(std::abs(a.points[i] - a.points[j]) - std::sqrt(2.0)) < 1e-12)
                EXPECT_EQ(__builtin_popcount(static_cast<unsigned>(i ^ j)), 1);
    double energy = 0.0;
    for (const auto &p : a.points)
        energy += std::norm(p);
    EXPECT_NEAR(energy / 4.0, 1.0, 1e-15);
}

TEST(Qpsk, ConstantFrameAndRoundTrip)
{
    const auto a = qpsk();
    const DaftFrame zeros = modulate_bits(BitVector(32, 0), a, 1.0);
    EXPECT_LT((zeros.array() - zeros[0]).abs().maxCoeff(), 1e-15);

    std::mt19937_64 rng(1);
    for (double sigma : {0.1, 1.0, 31.6})
    {
        const BitVector bits = random_bits(rng, 256);
        EXPECT_EQ(demodulate(modulate_bits(bits, a, sigma), a, sigma), bits);
        EXPECT_NEAR(modulate_bits(bits, a, sigma).squaredNorm() / 128.0, sigma * sigma, 1e-9 * sigma * sigma);
    }
    EXPECT_THROW(modulate_bits(BitVector(5, 0), a, 1.0), std::invalid_argument);
}

TEST(CancelPilots, Cases)
{
    const AfdmConfig cfg = default_params(32, 1, 1);
    std::mt19937_64 rng(2);
    const auto ch = sample_channel(rng, 2, cfg);
    const SparseChannelMatrix h = effective_matrix(ch, cfg);
    const CVector xp = oracle::random_cvector(rng, 32);
    const CVector xd = oracle::random_cvector(rng, 32);
    const CVector w = oracle::random_cvector(rng, 32, 0.1);

    EXPECT_LT(cancel_pilots(h.apply(xp), h, xp).cwiseAbs().maxCoeff(), 1e-12);
    const CVector y = h.apply(xp + xd) + w;
    EXPECT_EQ(cancel_pilots(y, SparseChannelMatrix(32), xp), y);
    EXPECT_LT((cancel_pilots(y, h, xp) - (h.apply(xd) + w)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_THROW(cancel_pilots(y, h, CVector::Zero(31)), std::invalid_argument);
}

TEST(MpDetect, IdentityChannelNoiseFree)
{
    const auto a = scaled(qpsk(), 1.3);
    std::mt19937_64 rng(3);
    const auto idx = random_indices(rng, 64, 4);
    const MpResult r = mp_detect(symbols_from_indices(idx, a), identity(64), a, 1e-3);
    EXPECT_EQ(r.decisions, idx);
    EXPECT_TRUE(r.converged);
}

TEST(MpDetect, DampingDoesNotChangeInterferenceFreeDecisions)
{
    const auto a = qpsk();
    std::mt19937_64 rng(4);
    const auto idx = random_indices(rng, 64, 4);
    const CVector y = symbols_from_indices(idx, a) + oracle::random_cvector(rng, 64, 0.5);
    MpParams full{30, 1.0, 1e-4};
    MpParams damped{30, 0.6, 1e-4};
    const auto r1 = mp_detect(y, identity(64), a, 0.5, full);
    const auto r2 = mp_detect(y, identity(64), a, 0.5, damped);
    EXPECT_TRUE(r1.converged);
    EXPECT_TRUE(r2.converged);
    EXPECT_EQ(r1.decisions, r2.decisions);
}

// On a diagonal channel MP reduces to symbol-wise nearest-point decisions.
TEST(MpDetect, DiagonalChannelIsNearestNeighbour)
{
    const auto a = qpsk();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial)
    {
        const CVector gains = oracle::random_cvector(rng, 32);
        SparseChannelMatrix h(32);
        h.add({0, gains});
        const auto idx = random_indices(rng, 32, 4);
        const CVector y = h.apply(symbols_from_indices(idx, a)) + oracle::random_cvector(rng, 32, 0.3);
        const auto r = mp_detect(y, h, a, 0.3);
        const CVector eq = y.cwiseQuotient(gains);
        EXPECT_EQ(r.decisions, hard_decide(eq, a));
    }
}

TEST(MpDetect, PosteriorsAreDistributionsAtEveryIteration)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const auto a = qpsk();
    std::mt19937_64 rng(6);
    const auto ch = sample_channel(rng, 3, cfg);
    const SparseChannelMatrix h = effective_matrix(ch, cfg);
    const auto idx = random_indices(rng, 64, 4);
    const CVector y = h.apply(symbols_from_indices(idx, a)) + oracle::random_cvector(rng, 64, 0.1);
    for (int iters = 1; iters <= 12; ++iters)
    {
        const auto r = mp_detect(y, h, a, 0.1, {iters, 0.6, 0.0});
        ASSERT_EQ(r.posteriors.rows(), 64);
        ASSERT_EQ(r.posteriors.cols(), 4);
        EXPECT_GE(r.posteriors.minCoeff(), 0.0);
        EXPECT_LT((r.posteriors.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
    }
}

TEST(MpDetect, DeterministicAndReportsNonConvergence)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const auto a = qpsk();
    std::mt19937_64 rng(7);
    const SparseChannelMatrix h = effective_matrix(sample_channel(rng, 3, cfg), cfg);
    const CVector y = h.apply(symbols_from_indices(random_indices(rng, 64, 4), a)) + oracle::random_cvector(rng, 64);
    const auto r1 = mp_detect(y, h, a, 1.0, {1, 0.6, 0.0});
    const auto r2 = mp_detect(y, h, a, 1.0, {1, 0.6, 0.0});
    EXPECT_FALSE(r1.converged);
    EXPECT_EQ(r1.iterations, 1);
    EXPECT_EQ(r1.decisions, r2.decisions);
    EXPECT_EQ(r1.posteriors, r2.posteriors);
}

TEST(MpDetect, InvalidArguments)
{
    const auto a = qpsk();
    EXPECT_THROW(mp_detect(CVector::Zero(8), identity(8), a, 0.0), std::invalid_argument);
    EXPECT_THROW(mp_detect(CVector::Zero(7), identity(8), a, 1.0), std::invalid_argument);
    EXPECT_THROW(mp_detect(CVector::Zero(8), identity(8), a, 1.0, {30, 0.0, 1e-4}), std::invalid_argument);
    EXPECT_THROW(mp_detect(CVector::Zero(8), identity(8), a, 1.0, {0, 0.6, 1e-4}), std::invalid_argument);
}

TEST(MpDetect, ErrorRateFallsWithSnrOnIdentityChannel)
{
    const auto a = qpsk();
    std::mt19937_64 rng(8);
    double previous = 1.0;
    for (double snr_db : {0.0, 10.0, 20.0})
    {
        const double n0 = std::pow(10.0, -snr_db / 10.0);
        int errors = 0;
        const int frames = 40;
        for (int f = 0; f < frames; ++f)
        {
            const auto idx = random_indices(rng, 256, 4);
            const CVector y = symbols_from_indices(idx, a) + oracle::random_cvector(rng, 256, n0);
            const auto r = mp_detect(y, identity(256), a, n0);
            for (int k = 0; k < 256; ++k)
                errors += r.decisions[k] != idx[k];
        }
        const double ser = errors / (40.0 * 256.0);
        EXPECT_LE(ser, previous) << "SNR " << snr_db;
        previous = ser;
    }
    EXPECT_EQ(previous, 0.0);
}

TEST(ExactMap, NoiseFreeRecovery)
{
    const AfdmConfig cfg = default_params(8, 1, 1);
    const auto a = qpsk();
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 5; ++trial)
    {
        const CMatrix h = effective_matrix(sample_channel(rng, 2, cfg), cfg).to_dense();
        const auto idx = random_indices(rng, 8, 4);
        EXPECT_EQ(exact_map_oracle(h * symbols_from_indices(idx, a), h, a), idx);
    }
}

TEST(ExactMap, IdentityChannelIsNearestPoint)
{
    const auto a = qpsk();
    std::mt19937_64 rng(10);
    const CVector y = oracle::random_cvector(rng, 6, 2.0);
    EXPECT_EQ(exact_map_oracle(y, CMatrix::Identity(6, 6), a), hard_decide(y, a));
}

TEST(ExactMap, AgreesWithBruteForce)
{
    const AfdmConfig cfg = default_params(4, 0, 1);
    const auto a = qpsk();
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial)
    {
        const CMatrix h = effective_matrix(sample_channel(rng, 2, cfg), cfg).to_dense();
        const CVector y = h * symbols_from_indices(random_indices(rng, 4, 4), a) + oracle::random_cvector(rng, 4, 0.5);
        EXPECT_EQ(exact_map_oracle(y, h, a), oracle::brute_force_ml(y, h, a.points));
    }
}

TEST(ExactMap, RejectsLargeInstances)
{
    EXPECT_THROW(exact_map_oracle(CVector::Zero(11), CMatrix::Identity(11, 11), qpsk()), std::invalid_argument);
}

// Smaller-sample version of the MP-vs-MAP acceptance check.
TEST(MpDetect, CloseToExactMapOnSmallFrames)
{
    const AfdmConfig cfg = default_params(8, 1, 1);
    const auto a = qpsk();
    const double n0 = std::pow(10.0, -1.5);
    std::mt19937_64 rng(12);
    int mp_errors = 0;
    int map_errors = 0;
    const int trials = 300;
    for (int trial = 0; trial < trials; ++trial)
    {
        const SparseChannelMatrix h = effective_matrix(sample_channel(rng, 2, cfg), cfg);
        const auto idx = random_indices(rng, 8, 4);
        CVector y = h.apply(symbols_from_indices(idx, a));
        add_awgn(y, n0, rng);
        const auto mp = mp_detect(y, h, a, n0);
        const auto map = exact_map_oracle(y, h.to_dense(), a);
        for (int k = 0; k < 8; ++k)
        {
            mp_errors += mp.decisions[k] != idx[k];
            map_errors += map[k] != idx[k];
        }
    }
    EXPECT_LT(std::abs(mp_errors - map_errors) / (8.0 * trials), 1e-2);
}

TEST(MpDetect, PerRowNoise)
{
    const AfdmConfig cfg = default_params(64, 2, 2);
    const auto a = qpsk();
    std::mt19937_64 rng(13);
    const SparseChannelMatrix h = effective_matrix(sample_channel(rng, 3, cfg), cfg);
    const CVector y = h.apply(symbols_from_indices(random_indices(rng, 64, 4), a)) + oracle::random_cvector(rng, 64, 0.2);
    const auto flat = mp_detect(y, h, a, 0.2);
    const auto vec = mp_detect(y, h, a, Eigen::VectorXd::Constant(64, 0.2));
    EXPECT_EQ(flat.decisions, vec.decisions);
    EXPECT_EQ(flat.posteriors, vec.posteriors);

    // A row with huge noise carries no information.
    Eigen::VectorXd noisy = Eigen::VectorXd::Constant(64, 0.2);
    noisy[5] = 1e12;
    CVector y_bad = y;
    y_bad[5] += 1e3;
    const auto robust = mp_detect(y_bad, h, a, noisy);
    const auto orig = mp_detect(y, h, a, noisy);
    EXPECT_EQ(robust.decisions, orig.decisions);

    EXPECT_THROW(mp_detect(y, h, a, Eigen::VectorXd::Constant(63, 1.0)), std::invalid_argument);
    Eigen::VectorXd zero = Eigen::VectorXd::Constant(64, 1.0);
    zero[3] = 0.0;
    EXPECT_THROW(mp_detect(y, h, a, zero), std::invalid_argument);
}
