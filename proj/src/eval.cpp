#include "dwgc/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dwgc/parallel.hpp"

namespace dwgc {

std::string to_string(Method m) { return m == Method::kNaive ? "naive_dwgc" : "dwgc"; }

std::string to_string(Dataset d) {
    switch (d) {
        case Dataset::kArSim: return "ar_sim";
        case Dataset::kNarSim: return "nar_sim";
        case Dataset::kExternal: return "external";
    }
    return "external";
}

Method parse_method(const std::string& s) {
    if (s == "naive" || s == "naive_dwgc") return Method::kNaive;
    if (s == "dwgc") return Method::kDwgc;
    throw std::invalid_argument("unknown method '" + s + "' (expected naive or dwgc)");
}

Dataset parse_dataset(const std::string& s) {
    if (s == "ar" || s == "ar_sim") return Dataset::kArSim;
    if (s == "nar" || s == "nar_sim") return Dataset::kNarSim;
    if (s == "external") return Dataset::kExternal;
    throw std::invalid_argument("unknown dataset '" + s + "' (expected ar or nar)");
}

std::vector<std::pair<Window, bool>> detections(std::span<const WindowResult> results) {
    std::map<std::size_t, std::pair<Window, bool>> by_start;
    for (const auto& r : results) {
        auto [it, _] = by_start.try_emplace(r.window.start, r.window, false);
        it->second.second = it->second.second || r.causal;
    }
    std::vector<std::pair<Window, bool>> out;
    out.reserve(by_start.size());
    for (auto& [_, v] : by_start) out.push_back(v);
    return out;
}

namespace {

std::map<std::size_t, bool> label_map(std::span<const WindowLabel> labels) {
    std::map<std::size_t, bool> m;
    for (const auto& l : labels) m[l.window.start] = l.causal();
    return m;
}

bool label_for(const std::map<std::size_t, bool>& labels, const Window& w) {
    auto it = labels.find(w.start);
    if (it == labels.end()) throw std::invalid_argument("no label for window starting at " + std::to_string(w.start));
    return it->second;
}

}  // namespace

std::optional<double> recall(std::span<const WindowResult> results, std::span<const WindowLabel> labels) {
    const auto lm = label_map(labels);
    std::size_t positives = 0;
    std::size_t hits = 0;
    for (const auto& [w, detected] : detections(results)) {
        if (!label_for(lm, w)) continue;
        ++positives;
        hits += detected ? 1 : 0;
    }
    if (positives == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(positives);
}

double accuracy(std::span<const WindowResult> results, std::span<const WindowLabel> labels) {
    const auto lm = label_map(labels);
    const auto det = detections(results);
    if (det.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& [w, detected] : det) correct += detected == label_for(lm, w) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(det.size());
}

PreparedData prepare(const ExperimentConfig& config, std::uint64_t seed) {
    Simulation sim;
    std::vector<std::size_t> channels{0, 1};
    if (config.dataset == Dataset::kArSim) {
        auto c = config.ar;
        c.seed = seed;
        sim = gen_ar(c);
    } else if (config.dataset == Dataset::kNarSim) {
        auto c = config.nar_sim;
        c.seed = seed;
        sim = gen_nar(c);
    } else {
        throw std::invalid_argument("sweeps need a simulated dataset");
    }

    const auto diffed = difference_to_stationary(sim.series, config.max_diff_order);
    const std::size_t shift = sim.series.length() - diffed.series.length();

    PreparedData out;
    out.series = diffed.series;
    out.diff_orders = diffed.orders;
    out.truth.lag = sim.truth.lag;
    out.truth.length = out.series.length();
    for (auto t : sim.truth.impulse_times_1to2)
        if (t >= shift) out.truth.impulse_times_1to2.push_back(t - shift);
    for (auto t : sim.truth.impulse_times_2to1)
        if (t >= shift) out.truth.impulse_times_2to1.push_back(t - shift);
    out.pairs = ordered_pairs(channels);
    out.train_length = config.split.train_length(out.series.length(), config.nar.lag_order);
    return out;
}

WindowSpec scan_windows(std::size_t train_length, std::size_t lag_order, std::size_t k) {
    WindowSpec spec;
    spec.length = k;
    spec.stride = k;
    spec.validate();
    if (train_length < lag_order) throw std::invalid_argument("train_length shorter than lag order");
    spec.origin = train_length - ((train_length - lag_order) / k) * k;
    return spec;
}

std::vector<WindowResult> test_windows_only(std::span<const WindowResult> results, std::size_t train_length) {
    std::vector<WindowResult> out;
    for (const auto& r : results)
        if (r.window.start >= train_length) out.push_back(r);
    return out;
}

std::vector<std::uint64_t> seed_range(std::size_t n) {
    std::vector<std::uint64_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = i;
    return s;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd m;
    if (v.empty()) return m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return m;
}

SeedOutcome score(std::uint64_t seed, std::span<const WindowResult> all, const PreparedData& data,
                  std::size_t train_length, LabelRule rule) {
    const auto results = test_windows_only(all, train_length);
    std::vector<Window> ws;
    for (const auto& [w, _] : detections(results)) ws.push_back(w);
    const auto labels = label_windows(data.truth, ws, rule);

    SeedOutcome o;
    o.seed = seed;
    o.recall = recall(results, labels);
    o.accuracy = accuracy(results, labels);
    o.windows = ws.size();
    for (const auto& l : labels) o.causal_windows += l.causal() ? 1 : 0;
    for (const auto& [_, d] : detections(results)) o.detected_windows += d ? 1 : 0;
    return o;
}

}  // namespace

EvalReport sweep(const ExperimentConfig& config, Method method, std::span<const std::size_t> window_lengths,
                 std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
    if (window_lengths.empty()) throw std::invalid_argument("sweep needs at least one window length");
    const auto started = std::chrono::steady_clock::now();

    // outcomes[seed][k]
    std::vector<std::vector<SeedOutcome>> outcomes(seeds.size(), std::vector<SeedOutcome>(window_lengths.size()));
    parallel_for(seeds.size(), config.jobs, [&](std::size_t s) {
        const auto seed = seeds[s];
        auto fail_all = [&](const std::string& why) {
            for (std::size_t k = 0; k < window_lengths.size(); ++k) {
                outcomes[s][k].seed = seed;
                outcomes[s][k].ok = false;
                outcomes[s][k].error = why;
            }
        };
        PreparedData data;
        NarConfig nar = config.nar;
        nar.seed = seed;
        try {
            data = prepare(config, seed);
        } catch (const std::exception& e) {
            fail_all(e.what());
            return;
        }

        std::optional<ModelBank> naive_bank;
        for (std::size_t ki = 0; ki < window_lengths.size(); ++ki) {
            const std::size_t k = window_lengths[ki];
            try {
                DwgcOptions opt;
                opt.windows = scan_windows(data.train_length, nar.lag_order, k);
                opt.train_length = data.train_length;
                opt.nar = nar;
                opt.indexing = config.indexing;
                opt.epsilon = config.epsilon;
                std::vector<WindowResult> results;
                if (method == Method::kNaive) {
                    // Naive forecasters do not depend on k; fit once per seed.
                    if (!naive_bank) naive_bank = fit_models(data.series, data.pairs, {0, data.train_length}, nar);
                    results = scan(data.series, data.pairs, opt.windows, config.epsilon, *naive_bank);
                } else {
                    results = run_dwgc(data.series, data.pairs, opt).results;
                }
                outcomes[s][ki] = score(seed, results, data, data.train_length, config.label_rule);
            } catch (const std::exception& e) {
                outcomes[s][ki].seed = seed;
                outcomes[s][ki].ok = false;
                outcomes[s][ki].error = e.what();
            }
        }
    });

    EvalReport report;
    report.method = method;
    report.dataset = config.dataset;
    report.window_lengths.assign(window_lengths.begin(), window_lengths.end());
    report.seeds.assign(seeds.begin(), seeds.end());
    for (std::size_t ki = 0; ki < window_lengths.size(); ++ki) {
        EvalCell cell;
        cell.window_length = window_lengths[ki];
        std::vector<double> recalls, accuracies;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& o = outcomes[s][ki];
            cell.per_seed.push_back(o);
            if (!o.ok) {
                report.complete = false;
                continue;
            }
            ++cell.seeds_ok;
            if (o.recall) recalls.push_back(*o.recall);
            accuracies.push_back(o.accuracy);
        }
        if (!recalls.empty()) {
            const auto r = mean_std(recalls);
            cell.recall_mean = r.mean;
            cell.recall_std = r.std;
        }
        const auto a = mean_std(accuracies);
        cell.accuracy_mean = a.mean;
        cell.accuracy_std = a.std;
        report.cells.push_back(std::move(cell));
    }
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string report_to_json(std::span<const EvalReport> reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rep : reports) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : rep.cells) {
            nlohmann::json per = nlohmann::json::array();
            for (const auto& o : c.per_seed) {
                nlohmann::json j{{"seed", o.seed},
                                 {"ok", o.ok},
                                 {"recall", o.recall ? nlohmann::json(*o.recall) : nlohmann::json(nullptr)},
                                 {"accuracy", o.accuracy},
                                 {"windows", o.windows},
                                 {"causal_windows", o.causal_windows},
                                 {"detected_windows", o.detected_windows}};
                if (!o.ok) j["error"] = o.error;
                per.push_back(std::move(j));
            }
            cells.push_back({{"window_length", c.window_length},
                             {"recall_mean", c.recall_mean ? nlohmann::json(*c.recall_mean) : nlohmann::json(nullptr)},
                             {"recall_std", c.recall_std},
                             {"accuracy_mean", c.accuracy_mean},
                             {"accuracy_std", c.accuracy_std},
                             {"seeds_ok", c.seeds_ok},
                             {"per_seed", std::move(per)}});
        }
        arr.push_back({{"method", to_string(rep.method)},
                       {"dataset", to_string(rep.dataset)},
                       {"window_lengths", rep.window_lengths},
                       {"seeds", rep.seeds},
                       {"complete", rep.complete},
                       {"accuracy_definition",
                        "fraction of test windows whose detection (any ordered pair with F > epsilon) matches its "
                        "label (window contains an impulse time)"},
                       {"cells", std::move(cells)}});
    }
    return nlohmann::json{{"reports", std::move(arr)}}.dump(2);
}

void write_report_text(std::span<const EvalReport> reports, std::ostream& out) {
    const auto fmt = [](double mean, double sd) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << mean << '(' << sd << ')';
        return s.str();
    };
    for (const char* metric : {"recall", "accuracy"}) {
        out << "Causality " << metric << " (mean(std) over seeds)\n";
        if (reports.empty()) continue;
        out << std::left << std::setw(22) << "dataset/method";
        for (auto k : reports.front().window_lengths) out << std::right << std::setw(12) << ("k=" + std::to_string(k));
        out << '\n';
        for (const auto& rep : reports) {
            out << std::left << std::setw(22) << (to_string(rep.dataset) + "/" + to_string(rep.method));
            for (const auto& c : rep.cells) {
                std::string cell;
                if (std::string(metric) == "recall") {
                    cell = c.recall_mean ? fmt(*c.recall_mean, c.recall_std) : "n/a";
                } else {
                    cell = fmt(c.accuracy_mean, c.accuracy_std);
                }
                out << std::right << std::setw(12) << cell;
            }
            out << (rep.complete ? "" : "  (incomplete)") << '\n';
        }
        out << '\n';
    }
    out << "accuracy: fraction of test windows whose detection matches the impulse-containment label\n";
}

// ---------------------------------------------------------------------------
// Theorem 1

Theorem1Report theorem1_check(const ExperimentConfig& config, std::span<const std::size_t> window_lengths,
                              std::span<const std::uint64_t> seeds) {
    struct Counts {
        std::size_t causal = 0, causal_exceed = 0, causal_pairs = 0, causal_pair_exceed = 0;
        std::size_t all = 0, all_exceed = 0, all_pairs = 0, all_pair_exceed = 0;
    };
    std::vector<std::vector<Counts>> counts(seeds.size(), std::vector<Counts>(window_lengths.size()));
    std::vector<std::vector<std::vector<ScatterPoint>>> points(seeds.size(),
                                                               std::vector<std::vector<ScatterPoint>>(window_lengths.size()));

    parallel_for(seeds.size(), config.jobs, [&](std::size_t s) {
        NarConfig nar = config.nar;
        nar.seed = seeds[s];
        const auto data = prepare(config, seeds[s]);
        const auto bank = fit_models(data.series, data.pairs, {0, data.train_length}, nar);
        for (std::size_t ki = 0; ki < window_lengths.size(); ++ki) {
            const auto spec = scan_windows(data.train_length, nar.lag_order, window_lengths[ki]);
            const auto results = test_windows_only(scan(data.series, data.pairs, spec, config.epsilon, bank),
                                                   data.train_length);
            std::map<std::size_t, std::pair<Window, std::vector<double>>> per_window;
            for (const auto& r : results) {
                auto& slot = per_window[r.window.start];
                slot.first = r.window;
                slot.second.push_back(r.f);
            }
            std::vector<Window> ws;
            for (const auto& [_, v] : per_window) ws.push_back(v.first);
            const auto labels = label_windows(data.truth, ws, config.label_rule);

            auto& c = counts[s][ki];
            std::size_t li = 0;
            for (const auto& [start, v] : per_window) {
                const bool causal = labels[li++].causal();
                const double fmax = *std::max_element(v.second.begin(), v.second.end());
                const auto pair_exceed = static_cast<std::size_t>(
                    std::count_if(v.second.begin(), v.second.end(), [](double f) { return f > 1.0; }));
                points[s][ki].push_back({window_lengths[ki], seeds[s], start, fmax, causal});
                c.all += 1;
                c.all_exceed += fmax > 1.0 ? 1 : 0;
                c.all_pairs += v.second.size();
                c.all_pair_exceed += pair_exceed;
                if (causal) {
                    c.causal += 1;
                    c.causal_exceed += fmax > 1.0 ? 1 : 0;
                    c.causal_pairs += v.second.size();
                    c.causal_pair_exceed += pair_exceed;
                }
            }
        }
    });

    Theorem1Report report;
    for (std::size_t ki = 0; ki < window_lengths.size(); ++ki) {
        Counts total;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& c = counts[s][ki];
            total.causal += c.causal;
            total.causal_exceed += c.causal_exceed;
            total.causal_pairs += c.causal_pairs;
            total.causal_pair_exceed += c.causal_pair_exceed;
            total.all += c.all;
            total.all_exceed += c.all_exceed;
            total.all_pairs += c.all_pairs;
            total.all_pair_exceed += c.all_pair_exceed;
        }
        Theorem1Row row;
        row.window_length = window_lengths[ki];
        row.null_reference = total.causal == 0;
        row.windows = row.null_reference ? total.all : total.causal;
        row.exceed = row.null_reference ? total.all_exceed : total.causal_exceed;
        const std::size_t pairs = row.null_reference ? total.all_pairs : total.causal_pairs;
        const std::size_t pair_exceed = row.null_reference ? total.all_pair_exceed : total.causal_pair_exceed;
        if (row.windows > 0) {
            row.p_hat = static_cast<double>(row.exceed) / static_cast<double>(row.windows);
            row.std_error = std::sqrt(row.p_hat * (1.0 - row.p_hat) / static_cast<double>(row.windows));
        }
        if (pairs > 0) row.p_hat_pair = static_cast<double>(pair_exceed) / static_cast<double>(pairs);
        report.rows.push_back(row);
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            report.scatter.insert(report.scatter.end(), points[s][ki].begin(), points[s][ki].end());
        }
    }
    return report;
}

bool nondecreasing_within_se(std::span<const Theorem1Row> rows) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double pooled = std::hypot(rows[i - 1].std_error, rows[i].std_error);
        if (rows[i].p_hat < rows[i - 1].p_hat - pooled) return false;
    }
    return true;
}

void write_scatter_csv(std::span<const ScatterPoint> points, std::ostream& out) {
    out << "k,seed,window_start,f_statistic,labeled_causal\n";
    for (const auto& p : points) {
        out << p.window_length << ',' << p.seed << ',' << p.window_start << ',' << format_double(p.f) << ','
            << (p.labeled_causal ? 1 : 0) << '\n';
    }
}

std::string theorem1_to_json(const Theorem1Report& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"window_length", r.window_length},
                        {"windows", r.windows},
                        {"exceed", r.exceed},
                        {"p_hat", r.p_hat},
                        {"std_error", r.std_error},
                        {"p_hat_pair", r.p_hat_pair},
                        {"null_reference", r.null_reference}});
    }
    return nlohmann::json{{"theorem1", std::move(rows)},
                          {"nondecreasing_within_se", nondecreasing_within_se(report.rows)}}
        .dump(2);
}

}  // namespace dwgc
