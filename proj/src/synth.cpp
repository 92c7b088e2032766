#include "dwgc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace dwgc {

namespace {

void validate_common(std::size_t length, const std::optional<std::size_t>& lag) {
    if (lag && (*lag < 1 || *lag > kMaxSimLag)) {
        throw std::invalid_argument("lag must lie in [1, 9], got " + std::to_string(*lag));
    }
    if (length <= kWarmup) throw std::invalid_argument("length must exceed the 10-point initial condition");
}

// 1,2,3,4,5,5,4,3,2,1 for t = 0..9.
double initial_value(std::size_t t) { return t < 5 ? static_cast<double>(t + 1) : static_cast<double>(10 - t); }

std::size_t pick_lag(const std::optional<std::size_t>& lag, std::mt19937_64& rng) {
    if (lag) return *lag;
    std::uniform_int_distribution<std::size_t> dist(1, kMaxSimLag);
    return dist(rng);
}

}  // namespace

void ArSimConfig::validate() const {
    validate_common(length, lag);
    if (!(impulse_prob >= 0.0 && impulse_prob <= 1.0)) throw std::invalid_argument("impulse_prob must lie in [0, 1]");
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("noise_scale must be >= 0");
}

void NarSimConfig::validate() const {
    validate_common(length, lag);
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("noise_scale must be >= 0");
    if (!(gate_threshold >= 0.0 && gate_threshold <= 1.0)) throw std::invalid_argument("gate_threshold must lie in [0, 1]");
}

double real_sqrt_shifted(double x) {
    const double arg = x * x - 1.0;
    return arg > 0.0 ? std::sqrt(arg) : 0.0;
}

Simulation gen_ar(const ArSimConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const std::size_t lag = pick_lag(config.lag, rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n = config.length;
    std::vector<double> t1(n), t2(n);
    GroundTruth truth;
    truth.lag = lag;
    truth.length = n;
    for (std::size_t t = 0; t < std::min(n, kWarmup); ++t) t1[t] = t2[t] = initial_value(t);

    for (std::size_t t = kWarmup; t < n; ++t) {
        const bool hit1 = unit(rng) < config.impulse_prob;
        const bool hit2 = unit(rng) < config.impulse_prob;
        const double m1 = hit1 ? config.impulse_coeff : config.base_coeff;
        const double m2 = hit2 ? config.impulse_coeff : config.base_coeff;
        const double e1 = normal(rng);
        const double e2 = normal(rng);
        t1[t] = m1 * t2[t - lag] + config.noise_scale * e1;
        t2[t] = m2 * t1[t - lag] + config.noise_scale * e2;
        if (hit1) truth.impulse_times_2to1.push_back(t);
        if (hit2) truth.impulse_times_1to2.push_back(t);
    }
    return {MultiChannelSeries({std::move(t1), std::move(t2)}, {"T1", "T2"}), std::move(truth)};
}

Simulation gen_nar(const NarSimConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const std::size_t lag = pick_lag(config.lag, rng);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n = config.length;
    std::vector<double> t1(n), t2(n), t3(n);
    GroundTruth truth;
    truth.lag = lag;
    truth.length = n;
    for (std::size_t t = 0; t < n; ++t) t3[t] = std::sin(config.gate_freq * static_cast<double>(t));
    for (std::size_t t = 0; t < std::min(n, kWarmup); ++t) t1[t] = t2[t] = initial_value(t);

    for (std::size_t t = kWarmup; t < n; ++t) {
        const bool gate1 = t3[t] > config.gate_threshold;
        const bool gate2 = t3[t] < -config.gate_threshold;
        const double m1 = gate1 ? config.impulse_coeff : config.base_coeff;
        const double m2 = gate2 ? config.impulse_coeff : config.base_coeff;
        const double e1 = normal(rng);
        const double e2 = normal(rng);
        t1[t] = m1 * real_sqrt_shifted(t2[t - lag]) + config.noise_scale * e1;
        t2[t] = m2 * real_sqrt_shifted(t1[t - lag]) + config.noise_scale * e2;
        if (gate1) truth.impulse_times_2to1.push_back(t);
        if (gate2) truth.impulse_times_1to2.push_back(t);
    }
    return {MultiChannelSeries({std::move(t1), std::move(t2), std::move(t3)}, {"T1", "T2", "T3"}), std::move(truth)};
}

namespace {

bool any_in(const std::vector<std::size_t>& sorted_times, std::size_t lo, std::size_t hi) {
    auto it = std::lower_bound(sorted_times.begin(), sorted_times.end(), lo);
    return it != sorted_times.end() && *it <= hi;
}

}  // namespace

std::vector<WindowLabel> label_windows(const GroundTruth& truth, std::span<const Window> windows, LabelRule rule) {
    std::vector<WindowLabel> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        const std::size_t lo = rule == LabelRule::kLagged ? (w.start >= truth.lag ? w.start - truth.lag : 0) : w.start;
        out.push_back({w, any_in(truth.impulse_times_2to1, lo, w.end), any_in(truth.impulse_times_1to2, lo, w.end)});
    }
    return out;
}

std::vector<WindowLabel> label_windows(const GroundTruth& truth, const WindowSpec& spec, LabelRule rule) {
    const auto ws = windows(truth.length, spec);
    return label_windows(truth, ws, rule);
}

std::string truth_to_json(const GroundTruth& truth) {
    nlohmann::json j{{"lag", truth.lag},
                     {"length", truth.length},
                     {"impulse_times_1to2", truth.impulse_times_1to2},
                     {"impulse_times_2to1", truth.impulse_times_2to1}};
    return j.dump(2);
}

GroundTruth truth_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    GroundTruth t;
    t.lag = j.at("lag").get<std::size_t>();
    t.length = j.at("length").get<std::size_t>();
    t.impulse_times_1to2 = j.at("impulse_times_1to2").get<std::vector<std::size_t>>();
    t.impulse_times_2to1 = j.at("impulse_times_2to1").get<std::vector<std::size_t>>();
    return t;
}

}  // namespace dwgc
