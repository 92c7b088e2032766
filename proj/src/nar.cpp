#include "dwgc/nar.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

namespace dwgc {

void NarConfig::validate() const {
    if (lag_order < 1) throw std::invalid_argument("lag_order must be >= 1");
    if (hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(early_stop_tol > 0.0)) throw std::invalid_argument("early_stop_tol must be > 0");
    if (early_stop_window < 1) throw std::invalid_argument("early_stop_window must be >= 1");
}

Eigen::VectorXd NarModel::forward(const Eigen::MatrixXd& inputs) const {
    Eigen::MatrixXd hidden = (inputs * input_weights.transpose()).rowwise() + hidden_bias.transpose();
    hidden = hidden.array().tanh();
    Eigen::VectorXd out = hidden * output_weights;
    out.array() += output_bias;
    return out;
}

NarModel make_model(const NarConfig& config, std::size_t target, std::optional<std::size_t> cause) {
    config.validate();
    if (cause && *cause == target) throw std::invalid_argument("cause channel must differ from target channel");

    NarModel m;
    m.config = config;
    m.target = target;
    m.cause = cause;
    const auto width = static_cast<Eigen::Index>(m.input_width());
    const auto hidden = static_cast<Eigen::Index>(config.hidden_units);

    std::mt19937_64 rng(config.seed);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(width));
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::uniform_real_distribution<double> in_dist(-in_bound, in_bound);
    std::uniform_real_distribution<double> out_dist(-out_bound, out_bound);

    m.input_weights.resize(hidden, width);
    for (Eigen::Index r = 0; r < hidden; ++r)
        for (Eigen::Index c = 0; c < width; ++c) m.input_weights(r, c) = in_dist(rng);
    m.hidden_bias = Eigen::VectorXd::Zero(hidden);
    m.output_weights.resize(hidden);
    for (Eigen::Index r = 0; r < hidden; ++r) m.output_weights(r) = out_dist(rng);
    m.output_bias = 0.0;
    return m;
}

namespace {

Standardizer standardizer_for(std::span<const double> values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    Standardizer s;
    s.mean = mean;
    s.scale = sd > 1e-12 * (1.0 + std::abs(mean)) ? sd : 1.0;
    return s;
}

void fill_row(const NarModel& model, const MultiChannelSeries& series, std::size_t t, Eigen::MatrixXd& rows,
              Eigen::Index r) {
    const std::size_t p = model.config.lag_order;
    for (std::size_t l = 1; l <= p; ++l) {
        rows(r, static_cast<Eigen::Index>(l - 1)) = model.target_scaler.forward(series.at(model.target, t - l));
    }
    if (model.cause) {
        for (std::size_t l = 1; l <= p; ++l) {
            rows(r, static_cast<Eigen::Index>(p + l - 1)) = model.cause_scaler.forward(series.at(*model.cause, t - l));
        }
    }
}

void check_channels(const NarModel& model, const MultiChannelSeries& series) {
    if (model.target >= series.channels() || (model.cause && *model.cause >= series.channels())) {
        throw std::invalid_argument("model channel not present in series");
    }
}

}  // namespace

Batch make_batch(const NarModel& model, const MultiChannelSeries& series, TimeRange range) {
    check_channels(model, series);
    if (range.begin < model.config.lag_order) throw NarError("batch starts before enough history is available");
    if (range.end > series.length() || range.begin >= range.end) throw NarError("invalid batch range");
    const auto n = static_cast<Eigen::Index>(range.end - range.begin);
    Batch batch;
    batch.inputs.resize(n, static_cast<Eigen::Index>(model.input_width()));
    batch.targets.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t t = range.begin + static_cast<std::size_t>(r);
        fill_row(model, series, t, batch.inputs, r);
        batch.targets(r) = model.target_scaler.forward(series.at(model.target, t));
    }
    return batch;
}

double loss_and_gradient(const NarModel& model, const Batch& batch, Eigen::VectorXd* gradient) {
    const auto n = batch.inputs.rows();
    Eigen::MatrixXd hidden = (batch.inputs * model.input_weights.transpose()).rowwise() + model.hidden_bias.transpose();
    hidden = hidden.array().tanh();
    Eigen::VectorXd residual = hidden * model.output_weights;
    residual.array() += model.output_bias - batch.targets.array();
    const double loss = residual.squaredNorm() / static_cast<double>(n);
    if (!gradient) return loss;

    const Eigen::VectorXd d_out = residual * (2.0 / static_cast<double>(n));
    const Eigen::VectorXd g_output_weights = hidden.transpose() * d_out;
    const double g_output_bias = d_out.sum();
    Eigen::MatrixXd d_hidden = d_out * model.output_weights.transpose();
    d_hidden.array() *= 1.0 - hidden.array().square();
    const Eigen::MatrixXd g_input_weights = d_hidden.transpose() * batch.inputs;
    const Eigen::VectorXd g_hidden_bias = d_hidden.colwise().sum().transpose();

    const auto h = model.input_weights.rows();
    const auto w = model.input_weights.cols();
    gradient->resize(h * w + 2 * h + 1);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) (*gradient)(k++) = g_input_weights(r, c);
    gradient->segment(k, h) = g_hidden_bias;
    k += h;
    gradient->segment(k, h) = g_output_weights;
    k += h;
    (*gradient)(k) = g_output_bias;
    return loss;
}

Eigen::VectorXd flatten(const NarModel& model) {
    const auto h = model.input_weights.rows();
    const auto w = model.input_weights.cols();
    Eigen::VectorXd p(h * w + 2 * h + 1);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) p(k++) = model.input_weights(r, c);
    p.segment(k, h) = model.hidden_bias;
    k += h;
    p.segment(k, h) = model.output_weights;
    k += h;
    p(k) = model.output_bias;
    return p;
}

void unflatten(NarModel& model, const Eigen::VectorXd& params) {
    const auto h = model.input_weights.rows();
    const auto w = model.input_weights.cols();
    if (params.size() != h * w + 2 * h + 1) throw std::invalid_argument("parameter vector has wrong size");
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) model.input_weights(r, c) = params(k++);
    model.hidden_bias = params.segment(k, h);
    k += h;
    model.output_weights = params.segment(k, h);
    k += h;
    model.output_bias = params(k);
}

NarModel fit(const MultiChannelSeries& series, std::size_t target, std::optional<std::size_t> cause, TimeRange range,
             const NarConfig& config) {
    NarModel model = make_model(config, target, cause);
    check_channels(model, series);
    const std::size_t p = config.lag_order;
    if (range.end > series.length() || range.begin >= range.end || range.end - range.begin < p + 1) {
        throw NarError("training range must contain at least lag_order + 1 = " + std::to_string(p + 1) + " points");
    }
    if (range.end <= p) throw NarError("training range ends before enough history is available");

    const auto span_of = [&](std::size_t c) { return series.channel(c).subspan(range.begin, range.end - range.begin); };
    model.target_scaler = standardizer_for(span_of(target));
    if (cause) model.cause_scaler = standardizer_for(span_of(*cause));

    const Batch batch = make_batch(model, series, {std::max(range.begin, p), range.end});

    Eigen::VectorXd params = flatten(model);
    Eigen::VectorXd grad;
    Eigen::VectorXd previous = params;
    auto& history = model.loss_history;
    history.clear();

    double loss = loss_and_gradient(model, batch, &grad);
    if (!std::isfinite(loss)) throw NarError("non-finite initial loss");
    history.push_back(loss);

    std::size_t epoch = 0;
    while (epoch < config.max_epochs && loss > 0.0) {
        previous = params;
        params -= config.learning_rate * grad;
        unflatten(model, params);
        ++epoch;

        const double next = loss_and_gradient(model, batch, &grad);
        if (!std::isfinite(next) || !params.allFinite()) {
            throw NarError("training diverged at epoch " + std::to_string(epoch));
        }
        if (next > loss + 1e-9) {
            // Loss went up: keep the previous weights and stop.
            params = previous;
            unflatten(model, params);
            --epoch;
            break;
        }
        loss = next;
        history.push_back(loss);

        const std::size_t w = config.early_stop_window;
        if (history.size() > w) {
            const double before = history[history.size() - 1 - w];
            if (before - loss <= config.early_stop_tol * before) break;
        }
    }
    model.epochs_run = epoch;
    model.train_mse = loss * model.target_scaler.scale * model.target_scaler.scale;
    return model;
}

std::vector<double> predict_window(const NarModel& model, const MultiChannelSeries& series, Window window) {
    check_channels(model, series);
    if (window.end < window.start || window.end >= series.length()) throw std::out_of_range("window outside series");
    if (window.start < model.config.lag_order) {
        throw NarError("window starting at " + std::to_string(window.start) + " lacks " +
                       std::to_string(model.config.lag_order) + " points of history");
    }
    const auto n = static_cast<Eigen::Index>(window.size());
    Eigen::MatrixXd rows(n, static_cast<Eigen::Index>(model.input_width()));
    for (Eigen::Index r = 0; r < n; ++r) fill_row(model, series, window.start + static_cast<std::size_t>(r), rows, r);
    const Eigen::VectorXd z = model.forward(rows);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = model.target_scaler.inverse(z(r));
    return out;
}

double gradient_check(const NarModel& model, const Batch& batch) {
    Eigen::VectorXd analytic;
    loss_and_gradient(model, batch, &analytic);

    NarModel probe = model;
    const Eigen::VectorXd base = flatten(model);
    constexpr double step = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < base.size(); ++k) {
        Eigen::VectorXd p = base;
        p(k) = base(k) + step;
        unflatten(probe, p);
        const double up = loss_and_gradient(probe, batch, nullptr);
        p(k) = base(k) - step;
        unflatten(probe, p);
        const double down = loss_and_gradient(probe, batch, nullptr);
        const double numeric = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(analytic(k)), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic(k) - numeric) / scale);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

}  // namespace

std::string model_to_json(const NarModel& model) {
    nlohmann::json j;
    j["config"] = {{"lag_order", model.config.lag_order},
                   {"hidden_units", model.config.hidden_units},
                   {"learning_rate", model.config.learning_rate},
                   {"max_epochs", model.config.max_epochs},
                   {"early_stop_tol", model.config.early_stop_tol},
                   {"early_stop_window", model.config.early_stop_window},
                   {"seed", model.config.seed}};
    j["target"] = model.target;
    j["cause"] = model.cause ? nlohmann::json(*model.cause) : nlohmann::json(nullptr);
    j["input_width"] = model.input_width();
    j["input_weights"] = matrix_json(model.input_weights);
    j["hidden_bias"] = matrix_json(model.hidden_bias);
    j["output_weights"] = matrix_json(model.output_weights);
    j["output_bias"] = model.output_bias;
    j["target_scaler"] = {model.target_scaler.mean, model.target_scaler.scale};
    j["cause_scaler"] = {model.cause_scaler.mean, model.cause_scaler.scale};
    j["train_mse"] = model.train_mse;
    j["epochs_run"] = model.epochs_run;
    return j.dump(2);
}

NarModel model_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    NarConfig cfg;
    const auto& c = j.at("config");
    cfg.lag_order = c.at("lag_order").get<std::size_t>();
    cfg.hidden_units = c.at("hidden_units").get<std::size_t>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.max_epochs = c.at("max_epochs").get<std::size_t>();
    cfg.early_stop_tol = c.at("early_stop_tol").get<double>();
    cfg.early_stop_window = c.at("early_stop_window").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();

    std::optional<std::size_t> cause;
    if (!j.at("cause").is_null()) cause = j.at("cause").get<std::size_t>();
    NarModel m = make_model(cfg, j.at("target").get<std::size_t>(), cause);

    const auto w = j.at("input_weights").get<std::vector<double>>();
    const auto hb = j.at("hidden_bias").get<std::vector<double>>();
    const auto ow = j.at("output_weights").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(m.input_weights.size()) ||
        hb.size() != static_cast<std::size_t>(m.hidden_bias.size()) ||
        ow.size() != static_cast<std::size_t>(m.output_weights.size())) {
        throw std::invalid_argument("model JSON weight shapes do not match its config");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.input_weights.rows(); ++r)
        for (Eigen::Index col = 0; col < m.input_weights.cols(); ++col) m.input_weights(r, col) = w[k++];
    m.hidden_bias = Eigen::Map<const Eigen::VectorXd>(hb.data(), static_cast<Eigen::Index>(hb.size()));
    m.output_weights = Eigen::Map<const Eigen::VectorXd>(ow.data(), static_cast<Eigen::Index>(ow.size()));
    m.output_bias = j.at("output_bias").get<double>();
    const auto ts = j.at("target_scaler").get<std::vector<double>>();
    const auto cs = j.at("cause_scaler").get<std::vector<double>>();
    m.target_scaler = {ts.at(0), ts.at(1)};
    m.cause_scaler = {cs.at(0), cs.at(1)};
    m.train_mse = j.at("train_mse").get<double>();
    m.epochs_run = j.at("epochs_run").get<std::size_t>();
    return m;
}

}  // namespace dwgc
