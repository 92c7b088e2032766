#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dwgc/series.hpp"

namespace dwgc {

struct NarConfig {
    std::size_t lag_order = 10;
    std::size_t hidden_units = 16;
    double learning_rate = 0.01;
    std::size_t max_epochs = 500;
    double early_stop_tol = 1e-5;      ///< relative MSE improvement over early_stop_window epochs
    std::size_t early_stop_window = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Half-open interval of target time indices [begin, end).
struct TimeRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Per-channel affine standardization learned on the training range.
struct Standardizer {
    double mean = 0.0;
    double scale = 1.0;

    double forward(double v) const { return (v - mean) / scale; }
    double inverse(double z) const { return z * scale + mean; }
};

class NarError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Design matrix in standardized units: one row per target time.
struct Batch {
    Eigen::MatrixXd inputs;   ///< rows x input_width
    Eigen::VectorXd targets;  ///< rows
};

/**
 * One-hidden-layer tanh perceptron predicting Y[target, t] from the previous
 * `lag_order` values of the target channel and, for the with-cause variant,
 * the previous `lag_order` values of the cause channel.
 *
 * Input layout per row: target lags t-1..t-p, then cause lags t-1..t-p.
 */
struct NarModel {
    NarConfig config;
    std::size_t target = 0;
    std::optional<std::size_t> cause;

    Eigen::MatrixXd input_weights;  ///< hidden x input_width
    Eigen::VectorXd hidden_bias;    ///< hidden
    Eigen::VectorXd output_weights; ///< hidden
    double output_bias = 0.0;

    Standardizer target_scaler;
    Standardizer cause_scaler;

    double train_mse = 0.0;         ///< in original (de-standardized) units
    std::size_t epochs_run = 0;
    std::vector<double> loss_history;  ///< standardized MSE per epoch, starting with the initial loss

    std::size_t input_width() const noexcept { return cause ? 2 * config.lag_order : config.lag_order; }

    /// Model output in standardized units for each input row.
    Eigen::VectorXd forward(const Eigen::MatrixXd& inputs) const;
};

/// Randomly initialized, untrained model.
NarModel make_model(const NarConfig& config, std::size_t target, std::optional<std::size_t> cause);

/// Standardized design rows for target times in `range` (all must be >= lag_order).
Batch make_batch(const NarModel& model, const MultiChannelSeries& series, TimeRange range);

/// Loss (standardized MSE) and its gradient in the flat parameter order of `flatten`.
double loss_and_gradient(const NarModel& model, const Batch& batch, Eigen::VectorXd* gradient);

/// All weights: input weights (row-major), hidden bias, output weights, output bias.
Eigen::VectorXd flatten(const NarModel& model);
void unflatten(NarModel& model, const Eigen::VectorXd& params);

/**
 * Trains by full-batch gradient descent on one-step-ahead MSE over target
 * times in `range`. Standardization statistics come from the values in
 * `range`. Deterministic given config.seed.
 */
NarModel fit(const MultiChannelSeries& series, std::size_t target, std::optional<std::size_t> cause,
             TimeRange range, const NarConfig& config);

/// Teacher-forced one-step predictions for every t in the window, in original units.
std::vector<double> predict_window(const NarModel& model, const MultiChannelSeries& series, Window window);

/// Max relative deviation between the analytic gradient and central differences (step 1e-5).
double gradient_check(const NarModel& model, const Batch& batch);

std::string model_to_json(const NarModel& model);
NarModel model_from_json(const std::string& text);

}  // namespace dwgc
