#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dwgc/series.hpp"

namespace dwgc {

inline constexpr std::size_t kMaxSimLag = 9;
/// Points set by the triangular initial condition before the recursion starts.
inline constexpr std::size_t kWarmup = 10;

/// Linear mutually-driven pair with randomly drawn impulse coefficients.
struct ArSimConfig {
    std::size_t length = 1000;
    std::optional<std::size_t> lag;  ///< empty draws a lag uniformly from 1..9
    double noise_scale = 0.02;
    double impulse_prob = 0.05;
    double base_coeff = 0.9;
    double impulse_coeff = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Nonlinear pair gated by a sine driver channel.
struct NarSimConfig {
    std::size_t length = 1000;
    std::optional<std::size_t> lag;
    double gate_freq = 0.1;
    double gate_threshold = 0.9;
    double base_coeff = 0.9;
    double impulse_coeff = 10.0;
    double noise_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GroundTruth {
    std::vector<std::size_t> impulse_times_1to2;  ///< channel 0 drives channel 1 with the impulse coefficient
    std::vector<std::size_t> impulse_times_2to1;  ///< channel 1 drives channel 0 with the impulse coefficient
    std::size_t lag = 1;
    std::size_t length = 0;
};

struct Simulation {
    MultiChannelSeries series;
    GroundTruth truth;
};

Simulation gen_ar(const ArSimConfig& config);
Simulation gen_nar(const NarSimConfig& config);

/// Re(sqrt(x^2 - 1)).
double real_sqrt_shifted(double x);

enum class LabelRule {
    kContainment,  ///< impulse time inside [start, end]
    kLagged,       ///< impulse time inside [start - lag, end]
};

struct WindowLabel {
    Window window;
    bool to1 = false;  ///< 2 -> 1 impulse
    bool to2 = false;  ///< 1 -> 2 impulse
    bool causal() const noexcept { return to1 || to2; }
};

std::vector<WindowLabel> label_windows(const GroundTruth& truth, std::span<const Window> windows,
                                       LabelRule rule = LabelRule::kContainment);
std::vector<WindowLabel> label_windows(const GroundTruth& truth, const WindowSpec& spec,
                                       LabelRule rule = LabelRule::kContainment);

std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const std::string& text);

}  // namespace dwgc
