#include "dwgc/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dwgc {

MultiChannelSeries::MultiChannelSeries(std::vector<std::vector<double>> channels,
                                       std::vector<std::string> names,
                                       std::vector<std::string> timestamps)
    : timestamps_(std::move(timestamps)) {
    if (channels.empty()) {
        throw std::invalid_argument("series needs at least one channel");
    }
    length_ = channels.front().size();
    if (length_ == 0) {
        throw std::invalid_argument("series needs at least one time point");
    }
    for (std::size_t d = 0; d < channels.size(); ++d) {
        if (channels[d].size() != length_) {
            throw std::invalid_argument("channel " + std::to_string(d) + " has length " +
                                        std::to_string(channels[d].size()) + ", expected " +
                                        std::to_string(length_));
        }
    }
    if (names.empty()) {
        for (std::size_t d = 0; d < channels.size(); ++d) names.push_back("ch" + std::to_string(d));
    } else if (names.size() != channels.size()) {
        throw std::invalid_argument("channel name count does not match channel count");
    }
    if (!timestamps_.empty() && timestamps_.size() != length_) {
        throw std::invalid_argument("timestamp count does not match series length");
    }
    names_ = std::move(names);

    values_.reserve(channels.size() * length_);
    for (std::size_t d = 0; d < channels.size(); ++d) {
        for (std::size_t t = 0; t < length_; ++t) {
            const double v = channels[d][t];
            if (!std::isfinite(v)) {
                throw std::invalid_argument("non-finite value in channel " + names_[d] + " at t=" +
                                            std::to_string(t));
            }
            values_.push_back(v);
        }
    }
}

std::span<const double> MultiChannelSeries::channel(std::size_t d) const {
    if (d >= channels()) throw std::out_of_range("channel index " + std::to_string(d));
    return {values_.data() + d * length_, length_};
}

MultiChannelSeries MultiChannelSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > length_) throw std::out_of_range("invalid slice range");
    std::vector<std::vector<double>> out(channels());
    for (std::size_t d = 0; d < channels(); ++d) {
        auto c = channel(d);
        out[d].assign(c.begin() + begin, c.begin() + end);
    }
    std::vector<std::string> ts;
    if (!timestamps_.empty()) ts.assign(timestamps_.begin() + begin, timestamps_.begin() + end);
    return MultiChannelSeries(std::move(out), names_, std::move(ts));
}

void WindowSpec::validate() const {
    if (length < 2) {
        throw std::invalid_argument("window length must be at least 2, got " + std::to_string(length));
    }
}

std::vector<Window> windows(std::size_t series_length, const WindowSpec& spec) {
    spec.validate();
    std::vector<Window> out;
    const std::size_t stride = spec.effective_stride();
    for (std::size_t t = spec.origin; t + spec.length <= series_length; t += stride) {
        out.push_back({t, t + spec.length - 1});
    }
    return out;
}

std::size_t SplitSpec::train_length(std::size_t series_length, std::size_t lag_order) const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must lie in (0,1)");
    }
    const auto n = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(series_length)));
    if (n < lag_order + 1) {
        throw std::invalid_argument("train prefix of " + std::to_string(n) + " points is shorter than lag order + 1 (" +
                                    std::to_string(lag_order + 1) + ")");
    }
    return n;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(pos)));
            break;
        }
        cells.push_back(trim(line.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

MultiChannelSeries read_csv(std::istream& in, const CsvOptions& options) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> names;
    std::vector<std::string> timestamps;
    std::vector<std::vector<double>> columns;
    std::size_t width = 0;
    bool header_pending = options.has_header;
    const std::size_t skip = options.has_time_column ? 1 : 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);

        if (width == 0) {
            width = cells.size();
            if (width <= skip) throw CsvError("no data columns on line " + std::to_string(line_no), line_no, 0);
            columns.resize(width - skip);
        } else if (cells.size() != width) {
            throw CsvError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(width),
                           line_no, 0);
        }

        if (header_pending) {
            for (std::size_t c = skip; c < width; ++c) names.emplace_back(cells[c]);
            header_pending = false;
            continue;
        }
        if (skip) timestamps.emplace_back(cells[0]);
        for (std::size_t c = skip; c < width; ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v)) {
                throw CsvError("non-numeric cell '" + std::string(cells[c]) + "' at row " + std::to_string(line_no) +
                                   ", column " + std::to_string(c + 1),
                               line_no, c + 1);
            }
            columns[c - skip].push_back(v);
        }
    }
    if (columns.empty() || columns.front().empty()) throw CsvError("CSV contains no data rows", 0, 0);
    return MultiChannelSeries(std::move(columns), std::move(names), std::move(timestamps));
}

MultiChannelSeries load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_csv(in, options);
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

void write_csv(const MultiChannelSeries& series, std::ostream& out) {
    const bool with_time = !series.timestamps().empty();
    if (with_time) out << "time,";
    for (std::size_t d = 0; d < series.channels(); ++d) out << (d ? "," : "") << series.names()[d];
    out << '\n';
    for (std::size_t t = 0; t < series.length(); ++t) {
        if (with_time) out << series.timestamps()[t] << ',';
        for (std::size_t d = 0; d < series.channels(); ++d) out << (d ? "," : "") << format_double(series.at(d, t));
        out << '\n';
    }
}

void save_csv(const MultiChannelSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_csv(series, out);
}

// ---------------------------------------------------------------------------
// Stationarity

bool DifferencingResult::all_stationary() const {
    return std::none_of(still_nonstationary.begin(), still_nonstationary.end(), [](bool b) { return b; });
}

bool looks_stationary(std::span<const double> values) {
    constexpr std::size_t kSegments = 4;
    const std::size_t seg = values.size() / kSegments;
    if (seg < 2) return true;  // too short to judge

    double means[kSegments];
    double stds[kSegments];
    double pooled_var = 0.0;
    for (std::size_t s = 0; s < kSegments; ++s) {
        auto part = values.subspan(s * seg, seg);
        const double mean = std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(seg);
        double ss = 0.0;
        for (double v : part) ss += (v - mean) * (v - mean);
        const double var = ss / static_cast<double>(seg);
        means[s] = mean;
        stds[s] = std::sqrt(var);
        pooled_var += var / kSegments;
    }
    const double pooled_std = std::sqrt(pooled_var);
    const auto [mn, mx] = std::minmax_element(std::begin(means), std::end(means));
    const auto [smin, smax] = std::minmax_element(std::begin(stds), std::end(stds));

    const double spread = *mx - *mn;
    const bool means_ok = pooled_std > 0.0 ? spread < 0.5 * pooled_std : spread <= 1e-12 * (1.0 + std::abs(*mx));
    bool stds_ok = true;
    if (*smax > 0.0) stds_ok = *smin > 0.0 && *smax / *smin < 2.0;
    return means_ok && stds_ok;
}

DifferencingResult difference_to_stationary(const MultiChannelSeries& series, std::size_t max_order) {
    const std::size_t d = series.channels();
    std::vector<std::vector<double>> diffed(d);
    DifferencingResult result;
    result.orders.assign(d, 0);
    result.still_nonstationary.assign(d, false);

    for (std::size_t c = 0; c < d; ++c) {
        auto src = series.channel(c);
        std::vector<double> v(src.begin(), src.end());
        std::size_t order = 0;
        while (!looks_stationary(v) && order < max_order && v.size() > 1) {
            for (std::size_t t = 0; t + 1 < v.size(); ++t) v[t] = v[t + 1] - v[t];
            v.pop_back();
            ++order;
        }
        result.orders[c] = order;
        result.still_nonstationary[c] = !looks_stationary(v);
        diffed[c] = std::move(v);
    }

    const std::size_t shift = *std::max_element(result.orders.begin(), result.orders.end());
    if (shift >= series.length()) throw std::invalid_argument("series too short for the requested differencing");
    const std::size_t n = series.length() - shift;
    for (std::size_t c = 0; c < d; ++c) {
        // Differencing by o drops o leading points; align every channel to the same end.
        const std::size_t drop = diffed[c].size() - n;
        diffed[c].erase(diffed[c].begin(), diffed[c].begin() + static_cast<std::ptrdiff_t>(drop));
    }
    std::vector<std::string> ts;
    if (!series.timestamps().empty()) ts.assign(series.timestamps().begin() + static_cast<std::ptrdiff_t>(shift), series.timestamps().end());
    result.series = MultiChannelSeries(std::move(diffed), series.names(), std::move(ts));
    return result;
}

}  // namespace dwgc
