#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dwgc/nar.hpp"
#include "dwgc/series.hpp"
#include "dwgc/wgc.hpp"

namespace dwgc {

/// Default constant of the scaling function h(x) = alpha - tanh(x).
inline constexpr double kDefaultAlpha = 6.0 / 5.0;

/// What h is applied to when building the target profile of a window.
enum class ResidualScaling {
    kHOfSquare,  ///< h(r^2)
    kSquareOfH,  ///< h(r)^2
};

/// Which forecaster's residuals feed the indexing loss.
enum class ResidualSource {
    kSelfOnly,
    kConditional,
};

/// Units of the residuals fed to h.
enum class ResidualUnits {
    kStandardized,  ///< divided by the forecaster's target scale
    kOriginal,
};

enum class Regularizer {
    kOff,
    kSmoothness,
    kSmoothnessRelu,
};

/// Whether point links pick the largest weights or the largest inverse weights.
enum class LinkReading {
    kPeakPhi,
    kPeakInversePhi,
};

struct IndexingConfig {
    double phi_learning_rate = 0.05;  ///< 0 freezes the index
    std::size_t phi_steps_per_outer = 1;
    double kl_epsilon = 1e-8;
    std::size_t outer_max_iters = 50;
    double converge_tol = 1e-3;
    double alpha = kDefaultAlpha;
    double phi_min = 0.1;
    double phi_max = 2.0;
    Regularizer regularizer = Regularizer::kOff;
    double reg_alpha_s = 0.0;
    double reg_beta_r = 0.0;
    ResidualScaling scaling = ResidualScaling::kHOfSquare;
    ResidualSource residual_source = ResidualSource::kSelfOnly;
    ResidualUnits residual_units = ResidualUnits::kStandardized;
    LinkReading link_reading = LinkReading::kPeakPhi;

    void validate() const;
};

/**
 * Per-(channel, time) reweighting coefficients. Starts at all ones and every
 * entry stays inside [phi_min, phi_max].
 */
class CausalityIndex {
public:
    CausalityIndex() = default;
    CausalityIndex(std::size_t channels, std::size_t length, double phi_min = 0.1, double phi_max = 2.0);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t length() const noexcept { return length_; }
    double phi_min() const noexcept { return phi_min_; }
    double phi_max() const noexcept { return phi_max_; }
    /// Bumped on every modification.
    std::size_t version() const noexcept { return version_; }

    double at(std::size_t channel, std::size_t t) const { return phi_[channel * length_ + t]; }
    std::span<const double> row(std::size_t channel) const { return {phi_.data() + channel * length_, length_}; }
    /// Stores the value clamped to [phi_min, phi_max].
    void set(std::size_t channel, std::size_t t, double value);

    /// Channel-per-column view, for CSV export.
    MultiChannelSeries as_series(const std::vector<std::string>& names) const;

private:
    std::vector<double> phi_;
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    double phi_min_ = 0.1;
    double phi_max_ = 2.0;
    std::size_t version_ = 0;
};

struct ReweightedSeries {
    MultiChannelSeries values;
    std::size_t phi_version = 0;
};

/// alpha - tanh(x); alpha must exceed 1.
double scale_h(double x, double alpha = kDefaultAlpha);

/// Elementwise product of series and index.
ReweightedSeries reweight(const MultiChannelSeries& series, const CausalityIndex& phi);

/// KL(P || Q) with P the normalized weights and Q the normalized h-scaled residual profile.
double indexing_loss(std::span<const double> phi_window, std::span<const double> residuals,
                     double alpha = kDefaultAlpha, double kl_epsilon = 1e-8,
                     ResidualScaling scaling = ResidualScaling::kHOfSquare);

/// d indexing_loss / d phi_window.
std::vector<double> indexing_loss_gradient(std::span<const double> phi_window, std::span<const double> residuals,
                                           double alpha = kDefaultAlpha, double kl_epsilon = 1e-8,
                                           ResidualScaling scaling = ResidualScaling::kHOfSquare);

/// One channel's residuals over one detected window.
struct IndexingTerm {
    std::size_t channel = 0;
    Window window;
    std::vector<double> residuals;
};

/// Sum of indexing_loss over terms, plus the regularizer when enabled.
double total_indexing_loss(const CausalityIndex& phi, std::span<const IndexingTerm> terms, const IndexingConfig& config);

/// phi_steps_per_outer gradient steps restricted to entries covered by `terms`.
CausalityIndex optimize_phi_step(const CausalityIndex& phi, std::span<const IndexingTerm> terms,
                                 const IndexingConfig& config);

struct RegularizerParts {
    double smoothness = 0.0;  ///< sum |phi_2l - phi_2l+1|, unweighted
    double relu = 0.0;        ///< clamped sufficient-condition gap, unweighted
};

/// Trailing element of an odd-length window is left unpaired.
RegularizerParts regularizer_parts(std::span<const double> phi_window);

/// alpha_s * smoothness + beta_r * relu.
double regularizer_value(std::span<const double> phi_window, double alpha_s, double beta_r);

struct PointLink {
    std::size_t source = 0;
    std::size_t t1 = 0;
    std::size_t target = 0;
    std::size_t t2 = 0;
    double score = 0.0;
    Window window;

    bool operator==(const PointLink&) const = default;
};

/// argmax over t1 < t2 inside the window of phi[source][t1] + phi[target][t2]; ties go to smallest (t1, t2).
PointLink locate_points(const CausalityIndex& phi, Window window, std::size_t source, std::size_t target,
                        LinkReading reading = LinkReading::kPeakPhi);

struct DwgcOptions {
    WindowSpec windows;
    std::size_t train_length = 0;  ///< models train on [0, train_length)
    NarConfig nar;
    IndexingConfig indexing;
    double epsilon = kDefaultEpsilon;
    std::size_t jobs = 1;
};

struct TraceEntry {
    std::size_t iteration = 0;
    double nar_mse = 0.0;
    double indexing_loss = 0.0;
    std::size_t detected_windows = 0;
};

struct DwgcResult {
    std::vector<WindowResult> results;
    CausalityIndex phi;  ///< index the results were computed with
    std::vector<PointLink> links;
    std::vector<TraceEntry> trace;
    bool converged = false;
};

/**
 * Alternates forecaster training on the reweighted series, a windowed F scan,
 * and index updates on the windows found causal, until both the mean forecaster
 * MSE and the indexing loss settle or outer_max_iters is reached. Point links
 * are emitted for every causal result of the final scan.
 */
DwgcResult run_dwgc(const MultiChannelSeries& series, std::span<const ChannelPair> pairs, const DwgcOptions& options);

/// Fixed all-ones index: train once on the raw series and scan.
std::vector<WindowResult> run_naive(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                                    const DwgcOptions& options);

void write_links_csv(std::span<const PointLink> links, std::ostream& out);
void write_trace_jsonl(std::span<const TraceEntry> trace, std::ostream& out);

}  // namespace dwgc
