#include "dwgc/indexing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace dwgc {

void IndexingConfig::validate() const {
    if (!(phi_learning_rate >= 0.0)) throw std::invalid_argument("phi_learning_rate must be >= 0");
    if (!(kl_epsilon > 0.0)) throw std::invalid_argument("kl_epsilon must be > 0");
    if (outer_max_iters < 1) throw std::invalid_argument("outer_max_iters must be >= 1");
    if (!(converge_tol > 0.0)) throw std::invalid_argument("converge_tol must be > 0");
    if (!(alpha > 1.0)) throw std::invalid_argument("alpha must be > 1");
    if (!(phi_min > 0.0 && phi_min <= 1.0 && phi_max >= 1.0)) {
        throw std::invalid_argument("phi bounds must satisfy 0 < phi_min <= 1 <= phi_max");
    }
    if (reg_alpha_s < 0.0 || reg_beta_r < 0.0) throw std::invalid_argument("regularizer weights must be >= 0");
}

CausalityIndex::CausalityIndex(std::size_t channels, std::size_t length, double phi_min, double phi_max)
    : phi_(channels * length, 1.0), channels_(channels), length_(length), phi_min_(phi_min), phi_max_(phi_max) {}

void CausalityIndex::set(std::size_t channel, std::size_t t, double value) {
    phi_[channel * length_ + t] = std::clamp(value, phi_min_, phi_max_);
    ++version_;
}

MultiChannelSeries CausalityIndex::as_series(const std::vector<std::string>& names) const {
    std::vector<std::vector<double>> rows(channels_);
    for (std::size_t c = 0; c < channels_; ++c) rows[c].assign(row(c).begin(), row(c).end());
    return MultiChannelSeries(std::move(rows), names);
}

double scale_h(double x, double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("scale_h: alpha must be > 1");
    return alpha - std::tanh(x);
}

ReweightedSeries reweight(const MultiChannelSeries& series, const CausalityIndex& phi) {
    if (series.channels() != phi.channels() || series.length() != phi.length()) {
        throw std::invalid_argument("reweight: index shape does not match series shape");
    }
    std::vector<std::vector<double>> out(series.channels());
    for (std::size_t c = 0; c < series.channels(); ++c) {
        out[c].resize(series.length());
        for (std::size_t t = 0; t < series.length(); ++t) out[c][t] = phi.at(c, t) * series.at(c, t);
    }
    return {MultiChannelSeries(std::move(out), series.names(), series.timestamps()), phi.version()};
}

namespace {

struct Profiles {
    std::vector<double> p;
    std::vector<double> q;
    double p_mass = 0.0;
};

Profiles profiles(std::span<const double> phi_window, std::span<const double> residuals, double alpha,
                  double kl_epsilon, ResidualScaling scaling) {
    if (phi_window.size() != residuals.size()) throw std::invalid_argument("indexing loss: length mismatch");
    if (phi_window.empty()) throw std::invalid_argument("indexing loss: empty window");
    const std::size_t k = phi_window.size();
    Profiles pr;
    pr.p.resize(k);
    pr.q.resize(k);
    double q_mass = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        pr.p[t] = phi_window[t] + kl_epsilon;
        const double r = residuals[t];
        const double h = scaling == ResidualScaling::kHOfSquare ? scale_h(r * r, alpha)
                                                                 : std::pow(scale_h(r, alpha), 2);
        pr.q[t] = h + kl_epsilon;
        pr.p_mass += pr.p[t];
        q_mass += pr.q[t];
    }
    for (std::size_t t = 0; t < k; ++t) {
        pr.p[t] /= pr.p_mass;
        pr.q[t] /= q_mass;
    }
    return pr;
}

double kl(const Profiles& pr) {
    double sum = 0.0;
    for (std::size_t t = 0; t < pr.p.size(); ++t) sum += pr.p[t] * std::log(pr.p[t] / pr.q[t]);
    return std::max(sum, 0.0);
}

}  // namespace

double indexing_loss(std::span<const double> phi_window, std::span<const double> residuals, double alpha,
                     double kl_epsilon, ResidualScaling scaling) {
    return kl(profiles(phi_window, residuals, alpha, kl_epsilon, scaling));
}

std::vector<double> indexing_loss_gradient(std::span<const double> phi_window, std::span<const double> residuals,
                                           double alpha, double kl_epsilon, ResidualScaling scaling) {
    const auto pr = profiles(phi_window, residuals, alpha, kl_epsilon, scaling);
    double divergence = 0.0;
    for (std::size_t t = 0; t < pr.p.size(); ++t) divergence += pr.p[t] * std::log(pr.p[t] / pr.q[t]);
    std::vector<double> g(pr.p.size());
    for (std::size_t t = 0; t < g.size(); ++t) g[t] = (std::log(pr.p[t] / pr.q[t]) - divergence) / pr.p_mass;
    return g;
}

// ---------------------------------------------------------------------------
// Regularizer

namespace {

constexpr double kReluCap = 1e6;

double relu_gap(std::span<const double> phi_window) {
    const std::size_t half = phi_window.size() / 2;
    if (half == 0) return 0.0;

    std::vector<double> paired(half);
    for (std::size_t m = 0; m < half; ++m) paired[m] = 0.5 * (phi_window[2 * m] + phi_window[2 * m + 1]);

    double mean = 0.0;
    double min_phi = std::numeric_limits<double>::infinity();
    for (double v : phi_window) {
        mean += v;
        min_phi = std::min(min_phi, v);
    }
    mean /= static_cast<double>(phi_window.size());

    // Threshold side: Gamma(k-1) / Gamma(k/2)^2 * max_p (E[phi]^2 / phi_p^2), in logs.
    const double k = static_cast<double>(phi_window.size());
    const double log_threshold =
        std::lgamma(k - 1.0) - 2.0 * std::lgamma(k / 2.0) + 2.0 * std::log(mean) - 2.0 * std::log(min_phi);

    // Sum side: sum_q 1 / (phihat_q^2 prod_{j != q} (1 - phihat_j^2 / phihat_q^2)), with signs tracked.
    std::vector<double> log_mag(half);
    std::vector<int> sign(half, 1);
    for (std::size_t q = 0; q < half; ++q) {
        const double pq2 = paired[q] * paired[q];
        double lm = -std::log(pq2);
        for (std::size_t j = 0; j < half; ++j) {
            if (j == q) continue;
            const double factor = 1.0 - paired[j] * paired[j] / pq2;
            if (factor < 0.0) sign[q] = -sign[q];
            lm -= std::log(std::max(std::abs(factor), 1e-12));
        }
        log_mag[q] = lm;
    }

    double top = log_threshold;
    for (double lm : log_mag) top = std::max(top, lm);
    double gap = std::exp(log_threshold - top);
    for (std::size_t q = 0; q < half; ++q) gap -= sign[q] * std::exp(log_mag[q] - top);
    if (!(gap > 0.0)) return 0.0;
    const double log_value = std::log(gap) + top;
    return log_value >= std::log(kReluCap) ? kReluCap : std::exp(log_value);
}

}  // namespace

RegularizerParts regularizer_parts(std::span<const double> phi_window) {
    RegularizerParts parts;
    for (std::size_t l = 0; 2 * l + 1 < phi_window.size(); ++l) {
        parts.smoothness += std::abs(phi_window[2 * l] - phi_window[2 * l + 1]);
    }
    parts.relu = relu_gap(phi_window);
    return parts;
}

double regularizer_value(std::span<const double> phi_window, double alpha_s, double beta_r) {
    const auto parts = regularizer_parts(phi_window);
    return alpha_s * parts.smoothness + beta_r * parts.relu;
}

namespace {

double term_regularizer(std::span<const double> w, const IndexingConfig& config) {
    switch (config.regularizer) {
        case Regularizer::kOff:
            return 0.0;
        case Regularizer::kSmoothness:
            return config.reg_alpha_s * regularizer_parts(w).smoothness;
        case Regularizer::kSmoothnessRelu:
            return regularizer_value(w, config.reg_alpha_s, config.reg_beta_r);
    }
    return 0.0;
}

void add_regularizer_gradient(std::span<const double> w, const IndexingConfig& config, std::vector<double>& g) {
    if (config.regularizer == Regularizer::kOff) return;
    for (std::size_t l = 0; 2 * l + 1 < w.size(); ++l) {
        const double d = w[2 * l] - w[2 * l + 1];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        g[2 * l] += config.reg_alpha_s * s;
        g[2 * l + 1] -= config.reg_alpha_s * s;
    }
    if (config.regularizer != Regularizer::kSmoothnessRelu || config.reg_beta_r == 0.0) return;
    // The gap has no convenient closed-form derivative; central differences suffice for an optional term.
    std::vector<double> probe(w.begin(), w.end());
    constexpr double step = 1e-6;
    for (std::size_t t = 0; t < w.size(); ++t) {
        probe[t] = w[t] + step;
        const double up = relu_gap(probe);
        probe[t] = w[t] - step;
        const double down = relu_gap(probe);
        probe[t] = w[t];
        g[t] += config.reg_beta_r * (up - down) / (2.0 * step);
    }
}

std::span<const double> phi_span(const CausalityIndex& phi, const IndexingTerm& term) {
    if (term.channel >= phi.channels() || term.window.end >= phi.length()) {
        throw std::out_of_range("indexing term outside the index");
    }
    if (term.residuals.size() != term.window.size()) throw std::invalid_argument("indexing term residual count");
    return phi.row(term.channel).subspan(term.window.start, term.window.size());
}

}  // namespace

double total_indexing_loss(const CausalityIndex& phi, std::span<const IndexingTerm> terms,
                           const IndexingConfig& config) {
    double total = 0.0;
    for (const auto& term : terms) {
        const auto w = phi_span(phi, term);
        total += indexing_loss(w, term.residuals, config.alpha, config.kl_epsilon, config.scaling);
        total += term_regularizer(w, config);
    }
    return total;
}

CausalityIndex optimize_phi_step(const CausalityIndex& phi, std::span<const IndexingTerm> terms,
                                 const IndexingConfig& config) {
    CausalityIndex next = phi;
    if (terms.empty() || config.phi_learning_rate == 0.0) return next;

    for (std::size_t step = 0; step < config.phi_steps_per_outer; ++step) {
        std::map<std::pair<std::size_t, std::size_t>, double> grad;
        for (const auto& term : terms) {
            const auto w = phi_span(next, term);
            auto g = indexing_loss_gradient(w, term.residuals, config.alpha, config.kl_epsilon, config.scaling);
            add_regularizer_gradient(w, config, g);
            for (std::size_t t = 0; t < g.size(); ++t) grad[{term.channel, term.window.start + t}] += g[t];
        }
        for (const auto& [key, g] : grad) {
            if (g == 0.0) continue;
            next.set(key.first, key.second, next.at(key.first, key.second) - config.phi_learning_rate * g);
        }
    }
    return next;
}

PointLink locate_points(const CausalityIndex& phi, Window window, std::size_t source, std::size_t target,
                        LinkReading reading) {
    if (window.end <= window.start) throw std::invalid_argument("locate_points: window needs at least two points");
    if (window.end >= phi.length()) throw std::out_of_range("locate_points: window outside the index");
    const auto value = [&](std::size_t c, std::size_t t) {
        return reading == LinkReading::kPeakPhi ? phi.at(c, t) : 1.0 / phi.at(c, t);
    };

    PointLink best;
    best.source = source;
    best.target = target;
    best.window = window;
    best.score = -std::numeric_limits<double>::infinity();

    // Best t1 for a given t2 is the earliest maximizer of the source weights before t2.
    std::size_t prefix_arg = window.start;
    for (std::size_t t2 = window.start + 1; t2 <= window.end; ++t2) {
        const std::size_t cand = t2 - 1;
        if (value(source, cand) > value(source, prefix_arg)) prefix_arg = cand;
        const double score = value(source, prefix_arg) + value(target, t2);
        if (score > best.score) {
            best.score = score;
            best.t1 = prefix_arg;
            best.t2 = t2;
        } else if (score == best.score && prefix_arg < best.t1) {
            best.t1 = prefix_arg;
            best.t2 = t2;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Alternating loop

namespace {

double relative_change(double now, double before) {
    const double scale = std::max({std::abs(now), std::abs(before), std::numeric_limits<double>::min()});
    return std::abs(now - before) / scale;
}

std::vector<double> residuals_over(const NarModel& model, const MultiChannelSeries& series, Window w,
                                   ResidualUnits units) {
    auto pred = predict_window(model, series, w);
    const auto actual = series.channel(model.target).subspan(w.start, w.size());
    const double scale = units == ResidualUnits::kStandardized ? model.target_scaler.scale : 1.0;
    for (std::size_t t = 0; t < pred.size(); ++t) pred[t] = (pred[t] - actual[t]) / scale;
    return pred;
}

std::vector<IndexingTerm> build_terms(const MultiChannelSeries& reweighted, std::span<const WindowResult> results,
                                      const ModelBank& bank, ResidualSource source,
                                      ResidualUnits units) {
    // (window start, channel) -> model providing the residuals
    std::map<std::pair<std::size_t, std::size_t>, std::pair<Window, const NarModel*>> chosen;
    for (const auto& r : results) {
        if (!r.causal) continue;
        const NarModel* target_model = source == ResidualSource::kConditional
                                           ? &bank.cause_model({r.source, r.target})
                                           : &bank.self_model(r.target);
        auto [it, inserted] = chosen.try_emplace({r.window.start, r.target}, r.window, target_model);
        if (!inserted && source == ResidualSource::kConditional && it->second.second->cause == std::nullopt) {
            it->second.second = target_model;
        }
        chosen.try_emplace({r.window.start, r.source}, r.window, &bank.self_model(r.source));
    }
    std::vector<IndexingTerm> terms;
    terms.reserve(chosen.size());
    for (const auto& [key, val] : chosen) {
        terms.push_back({key.second, val.first, residuals_over(*val.second, reweighted, val.first, units)});
    }
    return terms;
}

}  // namespace

DwgcResult run_dwgc(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                    const DwgcOptions& options) {
    options.indexing.validate();
    options.nar.validate();
    const auto ws = windows(series.length(), options.windows);
    const TimeRange train{0, options.train_length};

    DwgcResult out;
    CausalityIndex phi(series.channels(), series.length(), options.indexing.phi_min, options.indexing.phi_max);
    double prev_mse = 0.0;
    double prev_loss = 0.0;

    for (std::size_t iter = 1; iter <= options.indexing.outer_max_iters; ++iter) {
        const auto reweighted = reweight(series, phi);
        const auto bank = fit_models(reweighted.values, pairs, train, options.nar, options.jobs);
        auto results = scan(reweighted.values, pairs, ws, options.epsilon, bank, options.jobs);
        const auto terms = build_terms(reweighted.values, results, bank, options.indexing.residual_source,
                                       options.indexing.residual_units);

        TraceEntry entry;
        entry.iteration = iter;
        entry.nar_mse = bank.mean_train_mse();
        entry.indexing_loss = total_indexing_loss(phi, terms, options.indexing);
        // scan() groups results per window, pairs.size() entries each
        for (std::size_t w = 0, per = pairs.size(); per && w < results.size(); w += per) {
            bool any = false;
            for (std::size_t p = 0; p < per; ++p) any = any || results[w + p].causal;
            entry.detected_windows += any ? 1 : 0;
        }
        out.trace.push_back(entry);

        out.results = std::move(results);
        out.phi = phi;

        if (iter > 1 && relative_change(entry.nar_mse, prev_mse) < options.indexing.converge_tol &&
            relative_change(entry.indexing_loss, prev_loss) < options.indexing.converge_tol) {
            out.converged = true;
            break;
        }
        if (iter == options.indexing.outer_max_iters) break;

        prev_mse = entry.nar_mse;
        prev_loss = entry.indexing_loss;
        phi = optimize_phi_step(phi, terms, options.indexing);
    }

    for (const auto& r : out.results) {
        if (r.causal) out.links.push_back(locate_points(out.phi, r.window, r.source, r.target, options.indexing.link_reading));
    }
    return out;
}

std::vector<WindowResult> run_naive(const MultiChannelSeries& series, std::span<const ChannelPair> pairs,
                                    const DwgcOptions& options) {
    options.nar.validate();
    const auto bank = fit_models(series, pairs, {0, options.train_length}, options.nar, options.jobs);
    return scan(series, pairs, options.windows, options.epsilon, bank, options.jobs);
}

void write_links_csv(std::span<const PointLink> links, std::ostream& out) {
    out << "i,t1,j,t2,score\n";
    for (const auto& l : links) {
        out << l.source << ',' << l.t1 << ',' << l.target << ',' << l.t2 << ',' << format_double(l.score) << '\n';
    }
}

void write_trace_jsonl(std::span<const TraceEntry> trace, std::ostream& out) {
    for (const auto& e : trace) {
        nlohmann::json j{{"iteration", e.iteration},
                         {"nar_mse", e.nar_mse},
                         {"indexing_loss", e.indexing_loss},
                         {"detected_windows", e.detected_windows}};
        out << j.dump() << '\n';
    }
}

}  // namespace dwgc
