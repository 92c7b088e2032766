#include "dwgc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwgc/eval.hpp"
#include "dwgc/indexing.hpp"
#include "dwgc/nar.hpp"
#include "dwgc/series.hpp"
#include "dwgc/synth.hpp"
#include "dwgc/theory.hpp"
#include "dwgc/wgc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dwgc::cli {

namespace {

/// Raised for bad flag values, bad config files, and unusable inputs.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string out_dir = "out";
};

struct ModelFlags {
    NarConfig nar;
    IndexingConfig indexing;
    double epsilon = kDefaultEpsilon;
    std::string regularizer = "off";
    std::string scaling = "h-of-square";
    std::string residual_source = "self";
    std::string residual_units = "standardized";
    std::string link_reading = "peak";
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
    app->add_option("-j,--jobs", c.jobs, "Worker threads")->capture_default_str();
    app->add_option("-o,--out", c.out_dir, "Output directory")->capture_default_str();
    app->add_option("--config", "Flat key = value file; keys are long flag names, flags given here win");
}

void add_model_flags(CLI::App* app, ModelFlags& m) {
    app->add_option("--lag-order", m.nar.lag_order, "Lagged inputs per channel")->capture_default_str();
    app->add_option("--hidden", m.nar.hidden_units, "Hidden tanh units")->capture_default_str();
    app->add_option("--learning-rate", m.nar.learning_rate, "Forecaster gradient step")->capture_default_str();
    app->add_option("--max-epochs", m.nar.max_epochs, "Forecaster epoch cap")->capture_default_str();
    app->add_option("--epsilon", m.epsilon, "Causality threshold: a window is causal when L1/L2 > epsilon (default 1)")
        ->capture_default_str();
    app->add_option("--alpha", m.indexing.alpha, "Constant of the scaling h(x) = alpha - tanh(x) (default 6/5 = 1.2)")
        ->capture_default_str();
    app->add_option("--phi-lr", m.indexing.phi_learning_rate, "Causality index step size; 0 freezes the index")
        ->capture_default_str();
    app->add_option("--phi-steps", m.indexing.phi_steps_per_outer, "Index steps per outer iteration")
        ->capture_default_str();
    app->add_option("--outer-max-iters", m.indexing.outer_max_iters, "Outer iteration cap")->capture_default_str();
    app->add_option("--converge-tol", m.indexing.converge_tol, "Relative change that ends the outer loop")
        ->capture_default_str();
    app->add_option("--regularizer", m.regularizer, "off | smoothness | smoothness-relu")->capture_default_str();
    app->add_option("--reg-alpha-s", m.indexing.reg_alpha_s, "Smoothness weight")->capture_default_str();
    app->add_option("--reg-beta-r", m.indexing.reg_beta_r, "Gap term weight")->capture_default_str();
    app->add_option("--scaling", m.scaling, "h-of-square | square-of-h")->capture_default_str();
    app->add_option("--residual-source", m.residual_source, "self | conditional")->capture_default_str();
    app->add_option("--residual-units", m.residual_units, "standardized | original")->capture_default_str();
    app->add_option("--link-reading", m.link_reading, "peak | inverse")->capture_default_str();
}

template <typename E>
E pick(const std::string& flag, const std::string& value, std::initializer_list<std::pair<const char*, E>> choices) {
    for (const auto& [name, e] : choices)
        if (value == name) return e;
    std::string names;
    for (const auto& [name, e] : choices) names += (names.empty() ? "" : ", ") + std::string(name);
    throw UsageError(flag + ": unknown value '" + value + "' (expected one of " + names + ")");
}

void finalize(ModelFlags& m, std::uint64_t seed) {
    m.nar.seed = seed;
    m.indexing.regularizer = pick<Regularizer>("regularizer", m.regularizer,
                                               {{"off", Regularizer::kOff},
                                                {"smoothness", Regularizer::kSmoothness},
                                                {"smoothness-relu", Regularizer::kSmoothnessRelu}});
    m.indexing.scaling = pick<ResidualScaling>(
        "scaling", m.scaling, {{"h-of-square", ResidualScaling::kHOfSquare}, {"square-of-h", ResidualScaling::kSquareOfH}});
    m.indexing.residual_source = pick<ResidualSource>(
        "residual-source", m.residual_source,
        {{"self", ResidualSource::kSelfOnly}, {"conditional", ResidualSource::kConditional}});
    m.indexing.residual_units = pick<ResidualUnits>(
        "residual-units", m.residual_units,
        {{"standardized", ResidualUnits::kStandardized}, {"original", ResidualUnits::kOriginal}});
    m.indexing.link_reading = pick<LinkReading>(
        "link-reading", m.link_reading, {{"peak", LinkReading::kPeakPhi}, {"inverse", LinkReading::kPeakInversePhi}});
    if (!(m.epsilon > 0.0)) throw UsageError("epsilon must be > 0");
    try {
        m.nar.validate();
        m.indexing.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

json model_json(const ModelFlags& m) {
    return {{"lag_order", m.nar.lag_order},
            {"hidden", m.nar.hidden_units},
            {"learning_rate", m.nar.learning_rate},
            {"max_epochs", m.nar.max_epochs},
            {"early_stop_tol", m.nar.early_stop_tol},
            {"early_stop_window", m.nar.early_stop_window},
            {"epsilon", m.epsilon},
            {"alpha", m.indexing.alpha},
            {"phi_lr", m.indexing.phi_learning_rate},
            {"phi_steps", m.indexing.phi_steps_per_outer},
            {"phi_min", m.indexing.phi_min},
            {"phi_max", m.indexing.phi_max},
            {"kl_epsilon", m.indexing.kl_epsilon},
            {"outer_max_iters", m.indexing.outer_max_iters},
            {"converge_tol", m.indexing.converge_tol},
            {"regularizer", m.regularizer},
            {"reg_alpha_s", m.indexing.reg_alpha_s},
            {"reg_beta_r", m.indexing.reg_beta_r},
            {"scaling", m.scaling},
            {"residual_source", m.residual_source},
            {"residual_units", m.residual_units},
            {"link_reading", m.link_reading}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Collects the files a command writes and emits manifest.json last.
class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : root_(dir) {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec || !fs::is_directory(root_)) throw std::runtime_error("cannot create output directory " + dir);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream f(root_ / name, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + (root_ / name).string());
        files_.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a", hex64(fnv1a(content))}});
    }

    void finish(const std::string& command, const json& config) {
        const std::string canonical = config.dump();
        json manifest{{"command", command},
                      {"config", config},
                      {"config_hash", hex64(fnv1a(canonical))},
                      {"files", files_}};
        std::ofstream f(root_ / "manifest.json", std::ios::binary);
        f << manifest.dump(2) << '\n';
        if (!f) throw std::runtime_error("cannot write manifest.json");
    }

private:
    fs::path root_;
    json files_ = json::array();
};

template <typename F>
std::string render(F&& writer) {
    std::ostringstream s;
    writer(s);
    return s.str();
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string kind = "ar";
    std::size_t length = 1000;
    std::optional<std::size_t> lag;
    std::optional<double> noise_scale;
    double impulse_prob = 0.05;
    double base_coeff = 0.9;
    double impulse_coeff = 10.0;
};

int cmd_simulate(SimulateArgs& a, std::ostream& out) {
    Simulation sim;
    json config{{"kind", a.kind},
                {"seed", a.common.seed},
                {"length", a.length},
                {"lag", a.lag ? json(*a.lag) : json(nullptr)},
                {"base_coeff", a.base_coeff},
                {"impulse_coeff", a.impulse_coeff}};
    try {
        if (a.kind == "ar") {
            ArSimConfig c;
            c.length = a.length;
            c.lag = a.lag;
            if (a.noise_scale) c.noise_scale = *a.noise_scale;
            c.impulse_prob = a.impulse_prob;
            c.base_coeff = a.base_coeff;
            c.impulse_coeff = a.impulse_coeff;
            c.seed = a.common.seed;
            config["noise_scale"] = c.noise_scale;
            config["impulse_prob"] = c.impulse_prob;
            sim = gen_ar(c);
        } else if (a.kind == "nar") {
            NarSimConfig c;
            c.length = a.length;
            c.lag = a.lag;
            if (a.noise_scale) c.noise_scale = *a.noise_scale;
            c.base_coeff = a.base_coeff;
            c.impulse_coeff = a.impulse_coeff;
            c.seed = a.common.seed;
            config["noise_scale"] = c.noise_scale;
            sim = gen_nar(c);
        } else {
            throw UsageError("kind: expected ar or nar, got '" + a.kind + "'");
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    OutputDir dir(a.common.out_dir);
    dir.write("series.csv", render([&](std::ostream& s) { write_csv(sim.series, s); }));
    dir.write("truth.json", truth_to_json(sim.truth) + "\n");
    dir.finish("simulate", config);
    out << "wrote " << sim.series.length() << " points x " << sim.series.channels() << " channels (lag "
        << sim.truth.lag << ") to " << a.common.out_dir << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    Common common;
    ModelFlags model;
    std::string method = "dwgc";
    std::string input;
    std::size_t window_len = 10;
    std::size_t stride = 0;
    std::optional<std::size_t> origin;
    bool has_header = true;
    bool time_column = false;
    double train_fraction = 0.3;
    std::size_t max_diff_order = 2;
};

int cmd_analyze(AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    finalize(a.model, a.common.seed);
    Method method;
    try {
        method = parse_method(a.method);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("method: ") + e.what());
    }
    if (a.input.empty()) throw UsageError("input: no input file given");
    if (!fs::is_regular_file(a.input)) throw UsageError("input: file not found: " + a.input);

    MultiChannelSeries raw;
    try {
        raw = load_csv(a.input, {a.has_header, a.time_column});
    } catch (const CsvError& e) {
        throw UsageError(a.input + ": " + e.what());
    }
    if (raw.channels() < 2) throw UsageError("input: need at least two data channels, found " +
                                             std::to_string(raw.channels()));

    DifferencingResult diffed;
    DwgcOptions opt;
    try {
        diffed = difference_to_stationary(raw, a.max_diff_order);
        SplitSpec split{a.train_fraction};
        opt.train_length = split.train_length(diffed.series.length(), a.model.nar.lag_order);
        opt.windows.length = a.window_len;
        opt.windows.stride = a.stride;
        opt.windows.origin = a.origin.value_or(a.model.nar.lag_order);
        opt.windows.validate();
        if (opt.windows.origin < a.model.nar.lag_order)
            throw std::invalid_argument("origin must be at least lag-order");
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    for (std::size_t d = 0; d < diffed.series.channels(); ++d) {
        if (diffed.still_nonstationary[d])
            err << "warning: channel " << diffed.series.names()[d] << " still drifts after " << diffed.orders[d]
                << " differences\n";
    }
    opt.nar = a.model.nar;
    opt.indexing = a.model.indexing;
    opt.epsilon = a.model.epsilon;
    opt.jobs = a.common.jobs;
    const auto pairs = ordered_pairs(diffed.series.channels());

    json config{{"method", to_string(method)},
                {"input", fs::path(a.input).filename().string()},
                {"seed", a.common.seed},
                {"window_len", a.window_len},
                {"stride", opt.windows.effective_stride()},
                {"origin", opt.windows.origin},
                {"has_header", a.has_header},
                {"time_column", a.time_column},
                {"train_fraction", a.train_fraction},
                {"train_length", opt.train_length},
                {"max_diff_order", a.max_diff_order},
                {"diff_orders", diffed.orders},
                {"model", model_json(a.model)}};

    OutputDir dir(a.common.out_dir);
    std::vector<WindowResult> results;
    if (method == Method::kNaive) {
        results = run_naive(diffed.series, pairs, opt);
    } else {
        auto r = run_dwgc(diffed.series, pairs, opt);
        results = std::move(r.results);
        config["converged"] = r.converged;
        config["iterations"] = r.trace.size();
        std::vector<std::vector<double>> phi_rows;
        for (std::size_t d = 0; d < r.phi.channels(); ++d) phi_rows.emplace_back(r.phi.row(d).begin(), r.phi.row(d).end());
        const MultiChannelSeries phi(std::move(phi_rows), diffed.series.names(), diffed.series.timestamps());
        dir.write("phi.csv", render([&](std::ostream& s) { write_csv(phi, s); }));
        dir.write("links.csv", render([&](std::ostream& s) { write_links_csv(r.links, s); }));
        dir.write("trace.jsonl", render([&](std::ostream& s) { write_trace_jsonl(r.trace, s); }));
    }
    dir.write("results.csv", render([&](std::ostream& s) { write_results_csv(results, s); }));
    dir.write("results.json", results_to_json(results) + "\n");
    dir.finish("analyze", config);

    std::size_t causal = 0;
    for (const auto& r : results) causal += r.causal ? 1 : 0;
    out << results.size() << " window tests, " << causal << " causal; outputs in " << a.common.out_dir << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
    Common common;
    ModelFlags model;
    std::string dataset = "ar";
    std::string lengths = "10,20,30,100";
    std::size_t seeds = 20;
    std::size_t length = 1000;
    std::optional<std::size_t> lag;
    double impulse_prob = 0.05;
    double base_coeff = 0.9;
    double train_fraction = 0.3;
    std::size_t max_diff_order = 2;
    std::string label_rule = "containment";
};

struct Experiment {
    ExperimentConfig config;
    std::vector<std::size_t> lengths;
    std::vector<std::uint64_t> seeds;
    json description;
};

Experiment build_experiment(ExperimentArgs& a) {
    finalize(a.model, a.common.seed);
    if (a.seeds == 0) throw UsageError("seeds: need at least one seed");
    Experiment e;
    try {
        e.lengths = parse_size_list(a.lengths, "lengths");
    } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
    }
    for (auto k : e.lengths)
        if (k < 2) throw UsageError("lengths: window length must be at least 2");
    for (std::size_t i = 0; i < a.seeds; ++i) e.seeds.push_back(a.common.seed + i);

    auto& c = e.config;
    try {
        c.dataset = parse_dataset(a.dataset);
    } catch (const std::invalid_argument& ex) {
        throw UsageError(std::string("dataset: ") + ex.what());
    }
    if (c.dataset == Dataset::kExternal) throw UsageError("dataset: sweeps need ar or nar");
    c.ar.length = c.nar_sim.length = a.length;
    c.ar.lag = c.nar_sim.lag = a.lag;
    c.ar.impulse_prob = a.impulse_prob;
    c.ar.base_coeff = c.nar_sim.base_coeff = a.base_coeff;
    c.split.train_fraction = a.train_fraction;
    c.nar = a.model.nar;
    c.indexing = a.model.indexing;
    c.epsilon = a.model.epsilon;
    c.max_diff_order = a.max_diff_order;
    c.label_rule = pick<LabelRule>("label-rule", a.label_rule,
                                   {{"containment", LabelRule::kContainment}, {"lagged", LabelRule::kLagged}});
    c.jobs = a.common.jobs;
    try {
        c.ar.validate();
        c.nar_sim.validate();
        if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0))
            throw std::invalid_argument("train_fraction must lie in (0,1)");
    } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
    }
    e.description = {{"dataset", to_string(c.dataset)},
                     {"lengths", e.lengths},
                     {"seeds", e.seeds},
                     {"length", a.length},
                     {"lag", a.lag ? json(*a.lag) : json(nullptr)},
                     {"impulse_prob", a.impulse_prob},
                     {"base_coeff", a.base_coeff},
                     {"train_fraction", a.train_fraction},
                     {"max_diff_order", a.max_diff_order},
                     {"label_rule", a.label_rule},
                     {"model", model_json(a.model)}};
    return e;
}

struct EvaluateArgs {
    ExperimentArgs exp;
    std::string methods = "naive,dwgc";
};

int cmd_evaluate(EvaluateArgs& a, std::ostream& out, std::ostream& err) {
    auto e = build_experiment(a.exp);
    std::vector<Method> methods;
    std::stringstream ss(a.methods);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            methods.push_back(parse_method(item));
        } catch (const std::invalid_argument& ex) {
            throw UsageError(std::string("methods: ") + ex.what());
        }
    }
    if (methods.empty()) throw UsageError("methods: need at least one method");

    std::vector<EvalReport> reports;
    for (auto m : methods) reports.push_back(sweep(e.config, m, e.lengths, e.seeds));
    for (const auto& r : reports) {
        for (const auto& cell : r.cells)
            for (const auto& o : cell.per_seed)
                if (!o.ok)
                    err << "warning: " << to_string(r.method) << " k=" << cell.window_length << " seed " << o.seed
                        << " excluded: " << o.error << '\n';
    }

    json config = e.description;
    json names = json::array();
    for (auto m : methods) names.push_back(to_string(m));
    config["methods"] = names;

    OutputDir dir(a.exp.common.out_dir);
    dir.write("report.json", report_to_json(reports) + "\n");
    const auto text = render([&](std::ostream& s) { write_report_text(reports, s); });
    dir.write("report.txt", text);
    dir.finish("evaluate", config);
    out << text;
    return kOk;
}

struct TheoryArgs {
    ExperimentArgs exp;
    std::string sigmas = "1";
    std::size_t samples = 10000;
};

int cmd_theory(TheoryArgs& a, std::ostream& out) {
    auto e = build_experiment(a.exp);
    std::vector<double> sigmas;
    std::stringstream ss(a.sigmas);
    for (std::string item; std::getline(ss, item, ',');) {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size() || !(v >= 0.0))
            throw UsageError("sigma0: expected non-negative numbers, got '" + item + "'");
        sigmas.push_back(v);
    }
    if (sigmas.empty()) throw UsageError("sigma0: need at least one value");
    if (a.samples < 1000) throw UsageError("samples: need at least 1000");

    const auto report = theorem1_check(e.config, e.lengths, e.seeds);
    std::vector<CrossTermSummary> cross;
    for (double s : sigmas)
        for (auto k : e.lengths) cross.push_back(cross_term_ratio(k, s, a.samples, a.exp.common.seed));

    json config = e.description;
    config["sigma0"] = sigmas;
    config["samples"] = a.samples;

    OutputDir dir(a.exp.common.out_dir);
    dir.write("theorem1.json", theorem1_to_json(report) + "\n");
    dir.write("scatter.csv", render([&](std::ostream& s) { write_scatter_csv(report.scatter, s); }));
    dir.write("cross_term.json", cross_term_to_json(cross) + "\n");
    dir.finish("theory", config);

    out << "k      windows  P(F>1)   se\n";
    for (const auto& r : report.rows) {
        char line[96];
        std::snprintf(line, sizeof line, "%-6zu %-8zu %-8.4f %.4f%s\n", r.window_length, r.windows, r.p_hat,
                      r.std_error, r.null_reference ? "  (all windows, none labeled causal)" : "");
        out << line;
    }
    out << "non-decreasing within one pooled SE: " << (nondecreasing_within_se(report.rows) ? "yes" : "no") << '\n';
    return kOk;
}

void add_experiment_flags(CLI::App* app, ExperimentArgs& a) {
    add_common(app, a.common);
    add_model_flags(app, a.model);
    app->add_option("--dataset", a.dataset, "ar | nar")->capture_default_str();
    app->add_option("--lengths", a.lengths, "Window lengths, comma separated")->capture_default_str();
    app->add_option("--seeds", a.seeds, "Number of seeds, starting at --seed")->capture_default_str();
    app->add_option("--length", a.length, "Simulated series length")->capture_default_str();
    app->add_option("--lag", a.lag, "Simulator lag in 1..9; drawn per seed when absent");
    app->add_option("--impulse-prob", a.impulse_prob, "AR impulse probability")->capture_default_str();
    app->add_option("--base-coeff", a.base_coeff, "Cross coefficient outside impulses")->capture_default_str();
    app->add_option("--train-fraction", a.train_fraction, "Leading fraction used for training")
        ->capture_default_str();
    app->add_option("--max-diff-order", a.max_diff_order, "Differencing cap for stationarity")->capture_default_str();
    app->add_option("--label-rule", a.label_rule, "containment | lagged")->capture_default_str();
}

/// Splices `--config FILE` into the argument list: file entries come first so later flags override them.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> head, tail;
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& s = args[i];
        if (s == "--config") {
            if (i + 1 >= args.size()) throw UsageError("config: missing file name");
            path = args[++i];
        } else if (s.rfind("--config=", 0) == 0) {
            path = s.substr(9);
        } else {
            tail.push_back(s);
        }
    }
    if (!path) return args;
    if (!fs::is_regular_file(*path)) throw UsageError("config: file not found: " + *path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(*path);
    } catch (const CLI::Error& e) {
        throw UsageError("config: " + std::string(e.what()));
    }
    // program name and subcommand stay in front
    const std::size_t keep = std::min<std::size_t>(2, tail.size());
    head.assign(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(keep));
    for (const auto& item : items) {
        if (!item.parents.empty() || item.name == "++" || item.name == "--") {
            if (item.name == "++" || item.name == "--") continue;
            throw UsageError("config: sections are not supported (key " + item.name + ")");
        }
        if (item.name == "config") throw UsageError("config: files cannot include other files");
        std::string value;
        for (const auto& v : item.inputs) value += (value.empty() ? "" : ",") + v;
        head.push_back("--" + item.name + "=" + value);
    }
    head.insert(head.end(), tail.begin() + static_cast<std::ptrdiff_t>(keep), tail.end());
    return head;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size() || v == 0)
            throw std::invalid_argument(what + ": expected positive integers, got '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument(what + ": empty list");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Window-level Granger causality: simulate, analyze, evaluate, theory"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Generate a synthetic series and its ground truth");
    add_common(s, sim.common);
    s->add_option("--kind", sim.kind, "ar | nar")->capture_default_str();
    s->add_option("--length", sim.length, "Series length")->capture_default_str();
    s->add_option("--lag", sim.lag, "Cross-channel lag in 1..9; drawn from the seed when absent");
    s->add_option("--noise-scale", sim.noise_scale, "Noise standard deviation (ar 0.02, nar 1)");
    s->add_option("--impulse-prob", sim.impulse_prob, "AR impulse probability")->capture_default_str();
    s->add_option("--base-coeff", sim.base_coeff, "Cross coefficient outside impulses")->capture_default_str();
    s->add_option("--impulse-coeff", sim.impulse_coeff, "Cross coefficient at impulses")->capture_default_str();

    AnalyzeArgs an;
    auto* a = app.add_subcommand("analyze", "Window-level causality scan of a CSV series");
    add_common(a, an.common);
    add_model_flags(a, an.model);
    a->add_option("--method", an.method, "naive | dwgc")->capture_default_str();
    a->add_option("-i,--input", an.input, "Input CSV, one column per channel");
    a->add_option("--window-len", an.window_len, "Window length in rows")->capture_default_str();
    a->add_option("--stride", an.stride, "Window stride; 0 means window length")->capture_default_str();
    a->add_option("--origin", an.origin, "First window start; defaults to lag-order");
    a->add_option("--has-header", an.has_header, "First row holds channel names")->capture_default_str();
    a->add_flag("--time-column", an.time_column, "Leftmost column is a time label");
    a->add_option("--train-fraction", an.train_fraction, "Leading fraction used for training")
        ->capture_default_str();
    a->add_option("--max-diff-order", an.max_diff_order, "Differencing cap for stationarity")->capture_default_str();

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Recall and accuracy sweep over seeds and window lengths");
    add_experiment_flags(e, ev.exp);
    e->add_option("--methods", ev.methods, "Comma separated: naive, dwgc")->capture_default_str();

    TheoryArgs th;
    auto* t = app.add_subcommand("theory", "F > 1 rate per window length, scatter data, cross-term summaries");
    add_experiment_flags(t, th.exp);
    t->add_option("--sigma0", th.sigmas, "Residual std values for the cross-term study")->capture_default_str();
    t->add_option("--samples", th.samples, "Monte Carlo draws per cross-term grid point")->capture_default_str();

    try {
        auto expanded = expand_config(args);
        // CLI11 wants the arguments after the program name, reversed.
        std::vector<std::string> rest(expanded.begin() + (expanded.empty() ? 0 : 1), expanded.end());
        std::reverse(rest.begin(), rest.end());
        app.parse(rest);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kUsageError;
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsageError;
    }

    try {
        if (s->parsed()) return cmd_simulate(sim, out);
        if (a->parsed()) return cmd_analyze(an, out, err);
        if (e->parsed()) return cmd_evaluate(ev, out, err);
        if (t->parsed()) return cmd_theory(th, out);
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsageError;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kRuntimeFailure;
    }
    return kUsageError;
}

}  // namespace dwgc::cli
