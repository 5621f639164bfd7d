#pragma once

// Monte Carlo sweeps over data SNR, pilot count and receiver iterations,
// with the key/value config format and CSV output used by afdm-sim.
//
// Config file: one `key = value` per line, `#` starts a comment, lists are
// comma separated. Keys mirror ExperimentConfig field names.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "afdm/channel.hpp"
#include "afdm/daft.hpp"
#include "afdm/detection.hpp"
#include "afdm/estimation.hpp"
#include "afdm/pilot.hpp"
#include "afdm/receiver.hpp"

namespace afdm {

inline constexpr const char *kVersion = "0.1.0";

struct ExperimentConfig
{
    int n_subcarriers = 512;
    int alpha_max = 2;
    int l_max = 2;
    std::optional<double> c2; // default_c2(N) when unset
    int paths = 3;
    double snr_p_db = 50.0;
    std::vector<double> snr_d_db{10.0};
    double n0 = 1.0;
    bool add_noise = true;
    std::vector<int> pilot_counts{1};
    std::vector<int> iterations{1};
    int trials = 1000;
    std::uint64_t seed = 1;
    std::string output;
    double threshold_multiplier = 3.0;
    int mp_max_iters = 30;
    double mp_damping = 0.6;
    double mp_tolerance = 1e-4;
    bool soft_remodulation = true;
    bool account_estimation_error = true;

    AfdmConfig afdm() const
    {
        AfdmConfig cfg = default_params(n_subcarriers, alpha_max, l_max);
        if (c2)
            cfg.c2 = *c2;
        return cfg;
    }
    double sigma_p2() const { return n0 * std::pow(10.0, snr_p_db / 10.0); }
    double sigma_d2(double snr_db) const { return n0 * std::pow(10.0, snr_db / 10.0); }
};

struct SweepRecord
{
    double snr_d_db = 0.0;
    int pilot_count = 0;
    int iterations = 0;
    int trials = 0;
    double mse = 0.0;
    double mse_stddev = 0.0; // sample standard deviation of the per-trial error
    std::optional<double> ber; // unset when no data bits are carried
    std::uint64_t seed = 0;
    double wall_time = 0.0; // seconds spent in this point, summed over workers
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string &s, const std::string &what)
{
    if (s == "-inf")
        return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument(what + ": '" + s + "' is not a number");
    return v;
}

template <class Int>
Int parse_int(const std::string &s, const std::string &what)
{
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument(what + ": '" + s + "' is not an integer");
    return v;
}

inline bool parse_bool(const std::string &s, const std::string &what)
{
    if (s == "true" || s == "1" || s == "yes")
        return true;
    if (s == "false" || s == "0" || s == "no")
        return false;
    throw std::invalid_argument(what + ": '" + s + "' is not a boolean");
}

inline std::vector<std::string> split_list(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v)
{
    if (std::isinf(v))
        return v < 0 ? "-inf" : "inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s)
    {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

template <class T, class F>
std::string join(const std::vector<T> &v, F fmt)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        if (i)
            out += ',';
        out += fmt(v[i]);
    }
    return out;
}

} // namespace detail

/// Throws std::invalid_argument naming the offending field.
inline void validate(const ExperimentConfig &c)
{
    const AfdmConfig cfg = c.afdm();
    if (c.paths < 1 || c.paths > c.l_max + 1)
        throw std::invalid_argument("paths must lie in [1, l_max + 1]");
    if (c.trials < 1)
        throw std::invalid_argument("trials must be at least 1");
    if (!(c.n0 > 0.0))
        throw std::invalid_argument("n0 must be positive");
    if (!std::isfinite(c.snr_p_db))
        throw std::invalid_argument("snr_p_db must be finite");
    if (c.snr_d_db.empty() || c.pilot_counts.empty() || c.iterations.empty())
        throw std::invalid_argument("snr_d_db, pilot_counts and iterations must be non-empty");
    for (double s : c.snr_d_db)
        if (std::isnan(s) || s == std::numeric_limits<double>::infinity())
            throw std::invalid_argument("snr_d_db entries must be finite or -inf");
    const int max_pilots = max_pilot_count(cfg);
    for (int p : c.pilot_counts)
        if (p < 1 || p > max_pilots)
            throw std::invalid_argument("pilot count " + std::to_string(p) + " outside [1, " +
                                        std::to_string(max_pilots) + "]");
    for (int it : c.iterations)
        if (it < 1)
            throw std::invalid_argument("iterations entries must be positive");
    if (c.mp_max_iters < 1 || !(c.mp_damping > 0.0 && c.mp_damping <= 1.0) || !(c.mp_tolerance >= 0.0))
        throw std::invalid_argument("invalid message-passing parameters");
    if (!(c.threshold_multiplier >= 0.0))
        throw std::invalid_argument("threshold_multiplier must be nonnegative");
}

inline ExperimentConfig parse_config(std::string_view text)
{
    ExperimentConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string val = detail::trim(std::string_view(line).substr(eq + 1));
        const std::string what = "config line " + std::to_string(lineno) + " (" + key + ")";

        if (key == "n_subcarriers")
            c.n_subcarriers = detail::parse_int<int>(val, what);
        else if (key == "alpha_max")
            c.alpha_max = detail::parse_int<int>(val, what);
        else if (key == "l_max")
            c.l_max = detail::parse_int<int>(val, what);
        else if (key == "c2")
            c.c2 = detail::parse_double(val, what);
        else if (key == "paths")
            c.paths = detail::parse_int<int>(val, what);
        else if (key == "snr_p_db")
            c.snr_p_db = detail::parse_double(val, what);
        else if (key == "snr_d_db")
        {
            c.snr_d_db.clear();
            for (const auto &s : detail::split_list(val))
                c.snr_d_db.push_back(detail::parse_double(s, what));
        }
        else if (key == "n0")
            c.n0 = detail::parse_double(val, what);
        else if (key == "add_noise")
            c.add_noise = detail::parse_bool(val, what);
        else if (key == "pilot_counts")
        {
            c.pilot_counts.clear();
            for (const auto &s : detail::split_list(val))
                c.pilot_counts.push_back(detail::parse_int<int>(s, what));
        }
        else if (key == "iterations")
        {
            c.iterations.clear();
            for (const auto &s : detail::split_list(val))
                c.iterations.push_back(detail::parse_int<int>(s, what));
        }
        else if (key == "trials")
            c.trials = detail::parse_int<int>(val, what);
        else if (key == "seed")
            c.seed = detail::parse_int<std::uint64_t>(val, what);
        else if (key == "output")
            c.output = val;
        else if (key == "threshold_multiplier")
            c.threshold_multiplier = detail::parse_double(val, what);
        else if (key == "mp_max_iters")
            c.mp_max_iters = detail::parse_int<int>(val, what);
        else if (key == "mp_damping")
            c.mp_damping = detail::parse_double(val, what);
        else if (key == "mp_tolerance")
            c.mp_tolerance = detail::parse_double(val, what);
        else if (key == "soft_remodulation")
            c.soft_remodulation = detail::parse_bool(val, what);
        else if (key == "account_estimation_error")
            c.account_estimation_error = detail::parse_bool(val, what);
        else
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical key/value text; parse_config(to_config_text(c)) reproduces c.
inline std::string to_config_text(const ExperimentConfig &c)
{
    using detail::format_double;
    std::ostringstream o;
    o << "n_subcarriers = " << c.n_subcarriers << '\n'
      << "alpha_max = " << c.alpha_max << '\n'
      << "l_max = " << c.l_max << '\n';
    if (c.c2)
        o << "c2 = " << format_double(*c.c2) << '\n';
    o << "paths = " << c.paths << '\n'
      << "snr_p_db = " << format_double(c.snr_p_db) << '\n'
      << "snr_d_db = " << detail::join(c.snr_d_db, format_double) << '\n'
      << "n0 = " << format_double(c.n0) << '\n'
      << "add_noise = " << (c.add_noise ? "true" : "false") << '\n'
      << "pilot_counts = " << detail::join(c.pilot_counts, [](int v) { return std::to_string(v); }) << '\n'
      << "iterations = " << detail::join(c.iterations, [](int v) { return std::to_string(v); }) << '\n'
      << "trials = " << c.trials << '\n'
      << "seed = " << c.seed << '\n'
      << "threshold_multiplier = " << format_double(c.threshold_multiplier) << '\n'
      << "mp_max_iters = " << c.mp_max_iters << '\n'
      << "mp_damping = " << format_double(c.mp_damping) << '\n'
      << "mp_tolerance = " << format_double(c.mp_tolerance) << '\n'
      << "soft_remodulation = " << (c.soft_remodulation ? "true" : "false") << '\n'
      << "account_estimation_error = " << (c.account_estimation_error ? "true" : "false") << '\n';
    if (!c.output.empty())
        o << "output = " << c.output << '\n';
    return o.str();
}

/// FNV-1a of the canonical config text, excluding the output path.
inline std::uint64_t config_hash(ExperimentConfig c)
{
    c.output.clear();
    return detail::fnv1a(to_config_text(c));
}

/// Generator for trial `trial` of a run seeded with `seed`; independent of
/// which worker executes the trial.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    return std::mt19937_64(seq);
}

/// Runs every (snr_d, pilot_count, iterations) point. Each trial draws its
/// channel, data bits and unit noise once and reuses them across all points,
/// so points are compared on common random numbers. Records are ordered by
/// snr_d, then pilot count, then iterations, as listed in the config.
inline std::vector<SweepRecord> run_sweep(const ExperimentConfig &c, int workers = 1)
{
    validate(c);
    const AfdmConfig cfg = c.afdm();
    const int n = cfg.n_subcarriers;
    const int bps = cfg.bits_per_symbol;
    const ChannelPrior prior = uniform_prior(cfg);
    const double sigma_p2 = c.sigma_p2();
    const SymbolAlphabet alphabet = qpsk();

    struct Point
    {
        double snr_db;
        int pilots;
        double sigma_d2;
        std::unique_ptr<ReceiverContext> ctx;
    };
    std::vector<Point> points;
    for (double snr : c.snr_d_db)
        for (int pilots : c.pilot_counts)
        {
            const double sd2 = std::isinf(snr) ? 0.0 : c.sigma_d2(snr);
            points.push_back({snr, pilots, sd2,
                              std::make_unique<ReceiverContext>(cfg, make_pilot_config(cfg, pilots, sigma_p2),
                                                                prior, sd2, c.n0, c.threshold_multiplier,
                                                                alphabet)});
        }

    ReceiverParams rp;
    rp.max_iters = *std::max_element(c.iterations.begin(), c.iterations.end());
    rp.threshold_multiplier = c.threshold_multiplier;
    rp.detector.mp = {c.mp_max_iters, c.mp_damping, c.mp_tolerance};
    rp.detector.soft_remodulation = c.soft_remodulation;
    rp.detector.account_estimation_error = c.account_estimation_error;

    const std::size_t n_iter = c.iterations.size();
    const std::size_t trials = static_cast<std::size_t>(c.trials);
    auto slot = [&](std::size_t p, std::size_t k, std::size_t t) { return (p * n_iter + k) * trials + t; };
    std::vector<double> sq_err(points.size() * n_iter * trials);
    std::vector<std::int64_t> bit_err(points.size() * n_iter * trials);
    std::vector<double> seconds(points.size() * trials);

    auto run_trial = [&](std::size_t t, Daft &transform) {
        auto rng = trial_rng(c.seed, t);
        const ChannelRealization ch = sample_channel(rng, c.paths, cfg);
        BitVector bits(static_cast<std::size_t>(n) * bps);
        for (auto &b : bits)
            b = static_cast<std::uint8_t>(rng() >> 63);
        CVector noise = CVector::Zero(n);
        if (c.add_noise)
            add_awgn(noise, 1.0, rng);
        const DaftFrame unit_data = modulate_bits(bits, alphabet, 1.0);
        const CVector h_true = channel_on_grid(ch, cfg);

        for (std::size_t p = 0; p < points.size(); ++p)
        {
            const auto start = std::chrono::steady_clock::now();
            const Point &pt = points[p];
            const DaftFrame x = superimpose(pt.ctx->pilot(), unit_data * std::sqrt(pt.sigma_d2));
            CVector r = apply_time_domain(transform.inverse(x), ch, cfg, 0.0, rng);
            r += noise * std::sqrt(c.n0);
            const DaftFrame y = transform.forward(r);
            const ReceiverReport rep = run_receiver(y, *pt.ctx, rp);
            for (std::size_t k = 0; k < n_iter; ++k)
            {
                const int idx = std::min(c.iterations[k], rep.iteration_count()) - 1;
                const IterationRecord &it = rep.iterations[static_cast<std::size_t>(idx)];
                CVector err = -h_true;
                for (Eigen::Index q = 0; q < err.size(); ++q)
                    if (it.indicators[static_cast<std::size_t>(q)])
                        err[q] += it.h_hat[q];
                sq_err[slot(p, k, t)] = err.squaredNorm();
                std::int64_t errors = 0;
                if (!it.decisions.empty())
                {
                    const BitVector rx = indices_to_bits(it.decisions, alphabet);
                    for (std::size_t b = 0; b < bits.size(); ++b)
                        errors += rx[b] != bits[b];
                }
                bit_err[slot(p, k, t)] = errors;
            }
            seconds[p * trials + t] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
    };

    const int nworkers = std::max(1, std::min<int>(workers, c.trials));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        Daft transform(cfg);
        try
        {
            for (std::size_t t = next++; t < trials; t = next++)
                run_trial(t, transform);
        }
        catch (...)
        {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
            next = trials;
        }
    };
    if (nworkers == 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (int w = 0; w < nworkers; ++w)
            pool.emplace_back(worker);
        for (auto &th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    std::vector<SweepRecord> records;
    for (std::size_t p = 0; p < points.size(); ++p)
    {
        double wall = 0.0;
        for (std::size_t t = 0; t < trials; ++t)
            wall += seconds[p * trials + t];
        for (std::size_t k = 0; k < n_iter; ++k)
        {
            SweepRecord r;
            r.snr_d_db = points[p].snr_db;
            r.pilot_count = points[p].pilots;
            r.iterations = c.iterations[k];
            r.trials = c.trials;
            r.seed = c.seed;
            r.wall_time = wall;
            double sum = 0.0;
            std::int64_t errors = 0;
            for (std::size_t t = 0; t < trials; ++t)
            {
                sum += sq_err[slot(p, k, t)];
                errors += bit_err[slot(p, k, t)];
            }
            r.mse = sum / static_cast<double>(trials);
            double ss = 0.0;
            for (std::size_t t = 0; t < trials; ++t)
                ss += (sq_err[slot(p, k, t)] - r.mse) * (sq_err[slot(p, k, t)] - r.mse);
            r.mse_stddev = trials > 1 ? std::sqrt(ss / static_cast<double>(trials - 1)) : 0.0;
            if (points[p].sigma_d2 > 0.0)
                r.ber = static_cast<double>(errors) / (static_cast<double>(trials) * n * bps);
            records.push_back(r);
        }
    }
    return records;
}

inline constexpr const char *kCsvHeader = "snr_d_db,pilot_count,iterations,trials,mse,ber,seed";

inline std::string format_csv(const std::vector<SweepRecord> &records)
{
    using detail::format_double;
    std::string out = std::string(kCsvHeader) + '\n';
    for (const auto &r : records)
    {
        out += format_double(r.snr_d_db) + ',' + std::to_string(r.pilot_count) + ',' +
               std::to_string(r.iterations) + ',' + std::to_string(r.trials) + ',' + format_double(r.mse) +
               ',' + (r.ber ? format_double(*r.ber) : std::string()) + ',' + std::to_string(r.seed) + '\n';
    }
    return out;
}

inline void emit_csv(const std::vector<SweepRecord> &records, const std::string &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << format_csv(records);
    out.flush();
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

/// Reads the columns written by emit_csv (mse_stddev and wall_time are not stored).
inline std::vector<SweepRecord> parse_csv(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kCsvHeader)
        throw std::invalid_argument("parse_csv: missing or unexpected header");
    std::vector<SweepRecord> out;
    int lineno = 1;
    while (std::getline(in, line))
    {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ','))
            f.push_back(item);
        if (!line.empty() && line.back() == ',')
            f.emplace_back();
        if (f.size() != 7)
            throw std::invalid_argument("parse_csv: line " + std::to_string(lineno) + " has " +
                                        std::to_string(f.size()) + " fields");
        const std::string what = "csv line " + std::to_string(lineno);
        SweepRecord r;
        r.snr_d_db = detail::parse_double(f[0], what);
        r.pilot_count = detail::parse_int<int>(f[1], what);
        r.iterations = detail::parse_int<int>(f[2], what);
        r.trials = detail::parse_int<int>(f[3], what);
        r.mse = detail::parse_double(f[4], what);
        if (!f[5].empty())
            r.ber = detail::parse_double(f[5], what);
        r.seed = detail::parse_int<std::uint64_t>(f[6], what);
        out.push_back(r);
    }
    return out;
}

/// Companion metadata: config hash, seed, chirp parameters and code version.
inline std::string format_meta(const ExperimentConfig &c)
{
    const AfdmConfig cfg = c.afdm();
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(c)));
    std::ostringstream o;
    o << "config_hash = " << hash << '\n'
      << "seed = " << c.seed << '\n'
      << "c1 = " << detail::format_double(cfg.c1()) << '\n'
      << "c2 = " << detail::format_double(cfg.c2) << '\n'
      << "guard_q = " << guard_q(cfg) << '\n'
      << "version = " << kVersion << '\n';
    return o.str();
}

inline void write_meta(const ExperimentConfig &c, const std::string &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << format_meta(c);
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

} // namespace afdm
