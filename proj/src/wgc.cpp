#include "dwgc/wgc.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "dwgc/parallel.hpp"

namespace dwgc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t model_seed(std::uint64_t base, std::size_t target, std::optional<std::size_t> cause) {
    std::uint64_t s = splitmix64(base);
    s = splitmix64(s ^ static_cast<std::uint64_t>(target));
    return splitmix64(s ^ (cause ? static_cast<std::uint64_t>(*cause) + 1 : 0));
}

}  // namespace

std::vector<ChannelPair> ordered_pairs(std::span<const std::size_t> channels) {
    std::vector<ChannelPair> out;
    for (auto a : channels)
        for (auto b : channels)
            if (a != b) out.push_back({a, b});
    std::sort(out.begin(), out.end(), [](const ChannelPair& x, const ChannelPair& y) {
        return std::tie(x.target, x.source) < std::tie(y.target, y.source);
    });
    return out;
}

std::vector<ChannelPair> ordered_pairs(std::size_t channel_count) {
    std::vector<std::size_t> ids(channel_count);
    for (std::size_t i = 0; i < channel_count; ++i) ids[i] = i;
    return ordered_pairs(ids);
}

double window_mse(std::span<const double> predictions, std::span<const double> actuals) {
    if (predictions.size() != actuals.size()) {
        throw std::invalid_argument("window_mse: " + std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(actuals.size()) + " actuals");
    }
    if (predictions.empty()) throw std::invalid_argument("window_mse: empty window");
    double ss = 0.0;
    for (std::size_t t = 0; t < predictions.size(); ++t) {
        const double r = predictions[t] - actuals[t];
        ss += r * r;
    }
    return ss / static_cast<double>(predictions.size());
}

FStatistic f_statistic(double l1, double l2) {
    if (l2 < kErrorFloor) {
        return {std::max(l1, kErrorFloor) / kErrorFloor, true};
    }
    return {l1 / l2, false};
}

WindowResult test_pair(const MultiChannelSeries& series, std::size_t target, std::size_t source, Window window,
                       const NarModel& self_model, const NarModel& cause_model, double epsilon) {
    if (self_model.target != target || self_model.cause) {
        throw std::invalid_argument("self model does not predict the target from its own past");
    }
    if (cause_model.target != target || cause_model.cause != source) {
        throw std::invalid_argument("cause model does not match the (source, target) pair");
    }
    const auto actual = series.channel(target).subspan(window.start, window.size());
    const auto self_pred = predict_window(self_model, series, window);
    const auto cause_pred = predict_window(cause_model, series, window);

    WindowResult r;
    r.window = window;
    r.source = source;
    r.target = target;
    r.l1 = window_mse(self_pred, actual);
    r.l2 = window_mse(cause_pred, actual);
    const auto f = f_statistic(r.l1, r.l2);
    r.f = f.value;
    r.degenerate = f.degenerate;
    r.causal = r.f > epsilon;
    r.epsilon = epsilon;
    return r;
}

const NarModel& ModelBank::self_model(std::size_t target) const {
    auto it = self.find(target);
    if (it == self.end()) throw std::out_of_range("no self-only model for channel " + std::to_string(target));
    return it->second;
}

const NarModel& ModelBank::cause_model(ChannelPair pair) const {
    auto it = with_cause.find(pair);
    if (it == with_cause.end()) {
        throw std::out_of_range("no with-cause model for " + std::to_string(pair.source) + " -> " +
                                std::to_string(pair.target));
    }
    return it->second;
}

double ModelBank::mean_train_mse() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [_, m] : self) sum += m.train_mse, ++n;
    for (const auto& [_, m] : with_cause) sum += m.train_mse, ++n;
    return n ? sum / static_cast<double>(n) : 0.0;
}

ModelBank fit_models(const MultiChannelSeries& series, std::span<const ChannelPair> pairs, TimeRange train,
                     const NarConfig& config, std::size_t jobs) {
    struct Job {
        std::size_t target;
        std::optional<std::size_t> cause;
    };
    std::vector<Job> todo;
    std::vector<std::size_t> targets;
    for (const auto& p : pairs) {
        if (p.source == p.target) throw std::invalid_argument("pair source and target must differ");
        if (std::find(targets.begin(), targets.end(), p.target) == targets.end()) targets.push_back(p.target);
        if (std::find(targets.begin(), targets.end(), p.source) == targets.end()) targets.push_back(p.source);
    }
    std::sort(targets.begin(), targets.end());
    for (auto t : targets) todo.push_back({t, std::nullopt});
    for (const auto& p : pairs) todo.push_back({p.target, p.source});

    std::vector<NarModel> fitted(todo.size());
    parallel_for(todo.size(), jobs, [&](std::size_t k) {
        NarConfig cfg = config;
        cfg.seed = model_seed(config.seed, todo[k].target, todo[k].cause);
        fitted[k] = fit(series, todo[k].target, todo[k].cause, train, cfg);
    });

    ModelBank bank;
    for (std::size_t k = 0; k < todo.size(); ++k) {
        if (todo[k].cause) {
            bank.with_cause.emplace(ChannelPair{*todo[k].cause, todo[k].target}, std::move(fitted[k]));
        } else {
            bank.self.emplace(todo[k].target, std::move(fitted[k]));
        }
    }
    return bank;
}

std::vector<WindowResult> scan(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                               std::span<const Window> windows, double epsilon, const ModelBank& models,
                               std::size_t jobs) {
    std::vector<ChannelPair> ordered(pairs.begin(), pairs.end());
    std::sort(ordered.begin(), ordered.end(), [](const ChannelPair& x, const ChannelPair& y) {
        return std::tie(x.target, x.source) < std::tie(y.target, y.source);
    });
    std::vector<Window> ws(windows.begin(), windows.end());
    std::stable_sort(ws.begin(), ws.end(), [](const Window& a, const Window& b) { return a.start < b.start; });

    std::vector<WindowResult> out(ws.size() * ordered.size());
    parallel_for(ws.size(), jobs, [&](std::size_t w) {
        for (std::size_t p = 0; p < ordered.size(); ++p) {
            const auto& pair = ordered[p];
            out[w * ordered.size() + p] = test_pair(series, pair.target, pair.source, ws[w], models.self_model(pair.target),
                                                    models.cause_model(pair), epsilon);
        }
    });
    return out;
}

std::vector<WindowResult> scan(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                               const WindowSpec& spec, double epsilon, const ModelBank& models, std::size_t jobs) {
    const auto ws = windows(series.length(), spec);
    return scan(series, pairs, ws, epsilon, models, jobs);
}

void write_results_csv(std::span<const WindowResult> results, std::ostream& out) {
    out << "window_start,window_end,source,target,L1,L2,f,causal,degenerate\n";
    for (const auto& r : results) {
        out << r.window.start << ',' << r.window.end << ',' << r.source << ',' << r.target << ','
            << format_double(r.l1) << ',' << format_double(r.l2) << ',' << format_double(r.f) << ','
            << (r.causal ? 1 : 0) << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
}

std::string results_to_json(std::span<const WindowResult> results) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
        arr.push_back({{"window_start", r.window.start},
                       {"window_end", r.window.end},
                       {"source", r.source},
                       {"target", r.target},
                       {"L1", r.l1},
                       {"L2", r.l2},
                       {"f", r.f},
                       {"causal", r.causal},
                       {"degenerate", r.degenerate},
                       {"epsilon", r.epsilon}});
    }
    return arr.dump(2);
}

}  // namespace dwgc
