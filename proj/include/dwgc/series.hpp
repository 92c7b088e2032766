#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwgc {

/**
 * Multi-channel observation matrix, stored channel-major.
 *
 * Every channel has the same length and every value is finite. Instances are
 * immutable once constructed.
 */
class MultiChannelSeries {
public:
    MultiChannelSeries() = default;

    /// Builds from one vector per channel. Names default to "ch0".."chN".
    explicit MultiChannelSeries(std::vector<std::vector<double>> channels,
                                std::vector<std::string> names = {},
                                std::vector<std::string> timestamps = {});

    std::size_t channels() const noexcept { return names_.size(); }
    std::size_t length() const noexcept { return length_; }

    std::span<const double> channel(std::size_t d) const;
    double at(std::size_t d, std::size_t t) const { return values_[d * length_ + t]; }

    const std::vector<std::string>& names() const noexcept { return names_; }
    /// Optional per-time labels carried through from ingestion; empty when absent.
    const std::vector<std::string>& timestamps() const noexcept { return timestamps_; }

    /// Copy of the time range [begin, end).
    MultiChannelSeries slice(std::size_t begin, std::size_t end) const;

    bool operator==(const MultiChannelSeries&) const = default;

private:
    std::vector<double> values_;
    std::vector<std::string> names_;
    std::vector<std::string> timestamps_;
    std::size_t length_ = 0;
};

/// Inclusive index interval [start, end].
struct Window {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start + 1; }
    bool contains(std::size_t t) const noexcept { return t >= start && t <= end; }
    bool operator==(const Window&) const = default;
};

struct WindowSpec {
    std::size_t length = 10;
    std::size_t stride = 0;  ///< 0 means "same as length"
    std::size_t origin = 0;

    std::size_t effective_stride() const noexcept { return stride == 0 ? length : stride; }
    /// Throws std::invalid_argument unless length >= 2.
    void validate() const;
};

/// Windows of `spec` lying fully inside [0, series_length). Empty when the series is too short.
std::vector<Window> windows(std::size_t series_length, const WindowSpec& spec);

struct SplitSpec {
    double train_fraction = 0.3;

    /// Number of leading points used for training; at least lag_order + 1.
    std::size_t train_length(std::size_t series_length, std::size_t lag_order) const;
};

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
    bool has_header = true;
    bool has_time_column = false;  ///< leftmost column kept as labels, not data
};

class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& what, std::size_t row, std::size_t column)
        : std::runtime_error(what), row_(row), column_(column) {}

    /// 1-based line number in the file; 0 when not tied to a line.
    std::size_t row() const noexcept { return row_; }
    /// 1-based column; 0 when not tied to a cell.
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

MultiChannelSeries load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
MultiChannelSeries read_csv(std::istream& in, const CsvOptions& options = {});

/// Rows are time points; values use 17 significant digits so reading back is exact.
void save_csv(const MultiChannelSeries& series, const std::filesystem::path& path);
void write_csv(const MultiChannelSeries& series, std::ostream& out);

/// Shortest-safe decimal form of a double with 17 significant digits.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Stationarity preprocessing

struct DifferencingResult {
    MultiChannelSeries series;
    std::vector<std::size_t> orders;      ///< differences applied per channel
    std::vector<bool> still_nonstationary;  ///< true where max_order was not enough

    bool all_stationary() const;
};

/// Drift heuristic: four equal segments, means within 0.5 pooled std, stds within a 2x ratio.
bool looks_stationary(std::span<const double> values);

DifferencingResult difference_to_stationary(const MultiChannelSeries& series, std::size_t max_order);

}  // namespace dwgc
