#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dwgc/indexing.hpp"
#include "dwgc/nar.hpp"
#include "dwgc/series.hpp"
#include "dwgc/synth.hpp"
#include "dwgc/wgc.hpp"

namespace dwgc {

enum class Method { kNaive, kDwgc };
enum class Dataset { kArSim, kNarSim, kExternal };

std::string to_string(Method m);
std::string to_string(Dataset d);
Method parse_method(const std::string& s);
Dataset parse_dataset(const std::string& s);

/// True for every window that has at least one causal result, keyed by window start.
std::vector<std::pair<Window, bool>> detections(std::span<const WindowResult> results);

/// Fraction of causal-labeled windows detected; empty when no window is labeled causal.
std::optional<double> recall(std::span<const WindowResult> results, std::span<const WindowLabel> labels);

/// Fraction of windows whose detection matches its label.
double accuracy(std::span<const WindowResult> results, std::span<const WindowLabel> labels);

/// Everything needed to turn a seed into data, windows, and a method run.
struct ExperimentConfig {
    Dataset dataset = Dataset::kArSim;
    ArSimConfig ar;
    NarSimConfig nar_sim;
    SplitSpec split;
    NarConfig nar;
    IndexingConfig indexing;
    double epsilon = kDefaultEpsilon;
    std::size_t max_diff_order = 2;
    LabelRule label_rule = LabelRule::kContainment;
    std::size_t jobs = 1;
};

/// One simulated, preprocessed dataset ready for analysis.
struct PreparedData {
    MultiChannelSeries series;
    GroundTruth truth;  ///< impulse times re-indexed to the preprocessed series
    std::vector<ChannelPair> pairs;
    std::size_t train_length = 0;
    std::vector<std::size_t> diff_orders;
};

PreparedData prepare(const ExperimentConfig& config, std::uint64_t seed);

/**
 * Scanning windows of length k tiled so that one window starts exactly at
 * train_length; earlier windows (down to lag_order) exist only for index
 * updates. Stride equals k.
 */
WindowSpec scan_windows(std::size_t train_length, std::size_t lag_order, std::size_t k);

/// Results restricted to windows starting at or after train_length.
std::vector<WindowResult> test_windows_only(std::span<const WindowResult> results, std::size_t train_length);

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    std::optional<double> recall;
    double accuracy = 0.0;
    std::size_t windows = 0;
    std::size_t causal_windows = 0;
    std::size_t detected_windows = 0;
};

struct EvalCell {
    std::size_t window_length = 0;
    std::optional<double> recall_mean;
    double recall_std = 0.0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    std::size_t seeds_ok = 0;
    std::vector<SeedOutcome> per_seed;
};

struct EvalReport {
    Method method = Method::kNaive;
    Dataset dataset = Dataset::kArSim;
    std::vector<std::size_t> window_lengths;
    std::vector<std::uint64_t> seeds;
    std::vector<EvalCell> cells;
    bool complete = true;
    double runtime_seconds = 0.0;  ///< not serialized, so reports stay reproducible
};

EvalReport sweep(const ExperimentConfig& config, Method method, std::span<const std::size_t> window_lengths,
                 std::span<const std::uint64_t> seeds);

/// Seeds 0..n-1.
std::vector<std::uint64_t> seed_range(std::size_t n);

std::string report_to_json(std::span<const EvalReport> reports);
void write_report_text(std::span<const EvalReport> reports, std::ostream& out);

struct Theorem1Row {
    std::size_t window_length = 0;
    std::size_t windows = 0;     ///< windows the estimate is taken over
    std::size_t exceed = 0;      ///< of those, windows whose largest F exceeds 1
    double p_hat = 0.0;
    double std_error = 0.0;
    double p_hat_pair = 0.0;     ///< same, per (window, ordered pair)
    bool null_reference = false; ///< no causal windows: estimate is over all windows
};

struct ScatterPoint {
    std::size_t window_length = 0;
    std::uint64_t seed = 0;
    std::size_t window_start = 0;
    double f = 0.0;  ///< largest F over ordered pairs
    bool labeled_causal = false;
};

struct Theorem1Report {
    std::vector<Theorem1Row> rows;
    std::vector<ScatterPoint> scatter;
};

/// Naive-method estimate of P(F(k) > 1) on causal windows for each k.
Theorem1Report theorem1_check(const ExperimentConfig& config, std::span<const std::size_t> window_lengths,
                              std::span<const std::uint64_t> seeds);

/// Each estimate is at least the previous one minus their pooled standard error.
bool nondecreasing_within_se(std::span<const Theorem1Row> rows);

void write_scatter_csv(std::span<const ScatterPoint> points, std::ostream& out);
std::string theorem1_to_json(const Theorem1Report& report);

}  // namespace dwgc
