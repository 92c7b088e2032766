#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dwgc/nar.hpp"
#include "dwgc/series.hpp"

namespace dwgc {

/// Errors at or below this are floored before forming the F ratio.
inline constexpr double kErrorFloor = 1e-12;
/// Default decision threshold used in the synthetic experiments.
inline constexpr double kDefaultEpsilon = 1.0;

/// Ordered channel pair: does `source` help predict `target`?
struct ChannelPair {
    std::size_t source = 0;
    std::size_t target = 0;
    bool operator==(const ChannelPair&) const = default;
    auto operator<=>(const ChannelPair&) const = default;
};

/// Both directions of every unordered pair among `channels`.
std::vector<ChannelPair> ordered_pairs(std::span<const std::size_t> channels);
std::vector<ChannelPair> ordered_pairs(std::size_t channel_count);

struct WindowResult {
    Window window;
    std::size_t source = 0;
    std::size_t target = 0;
    double l1 = 0.0;  ///< MSE of the self-only model
    double l2 = 0.0;  ///< MSE of the with-cause model
    double f = 1.0;
    bool causal = false;
    bool degenerate = false;
    double epsilon = kDefaultEpsilon;

    bool operator==(const WindowResult&) const = default;
};

double window_mse(std::span<const double> predictions, std::span<const double> actuals);

struct FStatistic {
    double value = 1.0;
    bool degenerate = false;
};

/// L1 / L2, with both floored at kErrorFloor when L2 falls below it.
FStatistic f_statistic(double l1, double l2);

WindowResult test_pair(const MultiChannelSeries& series, std::size_t target, std::size_t source, Window window,
                       const NarModel& self_model, const NarModel& cause_model, double epsilon = kDefaultEpsilon);

/// Trained forecasters: one self-only model per target channel, one with-cause model per ordered pair.
struct ModelBank {
    std::map<std::size_t, NarModel> self;
    std::map<ChannelPair, NarModel> with_cause;

    const NarModel& self_model(std::size_t target) const;
    const NarModel& cause_model(ChannelPair pair) const;
    /// Mean training MSE over every model in the bank.
    double mean_train_mse() const;
};

/// Seeds are derived from config.seed and the channel indices, so results do not depend on fit order.
ModelBank fit_models(const MultiChannelSeries& series, std::span<const ChannelPair> pairs, TimeRange train,
                     const NarConfig& config, std::size_t jobs = 1);

/// One result per (window, pair), ordered by (window start, target, source).
std::vector<WindowResult> scan(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                               std::span<const Window> windows, double epsilon, const ModelBank& models,
                               std::size_t jobs = 1);

std::vector<WindowResult> scan(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                               const WindowSpec& spec, double epsilon, const ModelBank& models, std::size_t jobs = 1);

void write_results_csv(std::span<const WindowResult> results, std::ostream& out);
std::string results_to_json(std::span<const WindowResult> results);

}  // namespace dwgc
