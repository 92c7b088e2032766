#include <doctest.h>

#include <map>
#include <sstream>

#include "dwgc/eval.hpp"

using namespace dwgc;

namespace {

WindowResult result(std::size_t start, std::size_t k, std::size_t source, bool causal) {
    WindowResult r;
    r.window = {start, start + k - 1};
    r.source = source;
    r.target = 1 - source;
    r.causal = causal;
    return r;
}

WindowLabel label(std::size_t start, std::size_t k, bool causal) { return {{start, start + k - 1}, causal, false}; }

ExperimentConfig fast_config() {
    ExperimentConfig c;
    c.ar.length = 400;
    c.nar.max_epochs = 60;
    c.nar.hidden_units = 4;
    c.indexing.outer_max_iters = 2;
    return c;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

}  // namespace

TEST_CASE("recall counts labeled windows with any detection") {
    std::vector<WindowResult> all{result(0, 5, 0, true), result(0, 5, 1, false), result(5, 5, 0, false),
                                  result(5, 5, 1, true)};
    std::vector<WindowLabel> labels{label(0, 5, true), label(5, 5, true)};
    CHECK(*recall(all, labels) == 1.0);

    std::vector<WindowResult> none{result(0, 5, 0, false), result(5, 5, 1, false)};
    CHECK(*recall(none, labels) == 0.0);

    std::vector<WindowResult> three;
    std::vector<WindowLabel> four;
    for (std::size_t w = 0; w < 4; ++w) {
        three.push_back(result(w * 5, 5, 0, w != 2));
        three.push_back(result(w * 5, 5, 1, false));
        four.push_back(label(w * 5, 5, true));
    }
    CHECK(*recall(three, four) == 0.75);

    std::vector<WindowLabel> negatives{label(0, 5, false), label(5, 5, false)};
    CHECK_FALSE(recall(all, negatives).has_value());
}

TEST_CASE("accuracy counts agreement over all windows") {
    std::vector<WindowResult> rs;
    std::vector<WindowLabel> ls;
    for (std::size_t w = 0; w < 10; ++w) {
        rs.push_back(result(w * 4, 4, 0, true));
        ls.push_back(label(w * 4, 4, w % 2 == 0));
    }
    CHECK(accuracy(rs, ls) == 0.5);

    std::vector<WindowResult> seven;
    for (std::size_t w = 0; w < 10; ++w) seven.push_back(result(w * 4, 4, 1, w < 7 ? ls[w].causal() : !ls[w].causal()));
    CHECK(accuracy(seven, ls) == doctest::Approx(0.7));

    std::vector<WindowResult> perfect;
    for (std::size_t w = 0; w < 10; ++w) perfect.push_back(result(w * 4, 4, 0, ls[w].causal()));
    CHECK(accuracy(perfect, ls) == 1.0);
}

TEST_CASE("method and dataset names") {
    CHECK(parse_method("naive") == Method::kNaive);
    CHECK(parse_method("dwgc") == Method::kDwgc);
    CHECK(parse_dataset("ar") == Dataset::kArSim);
    CHECK(parse_dataset("nar") == Dataset::kNarSim);
    CHECK(to_string(Method::kNaive) == "naive_dwgc");
    CHECK(to_string(Dataset::kNarSim) == "nar_sim");
    CHECK_THROWS_AS(parse_method("lstm"), std::invalid_argument);
}

TEST_CASE("scan grid puts a window start exactly on the train boundary") {
    for (std::size_t k : {10u, 20u, 30u, 100u}) {
        const auto spec = scan_windows(300, 10, k);
        CHECK(spec.origin >= 10);
        CHECK(spec.origin < 10 + k);
        CHECK((300 - spec.origin) % k == 0);
    }
}

TEST_CASE("brute-force recount from the results CSV matches recall and accuracy") {
    const auto config = fast_config();
    const auto data = prepare(config, 4);
    NarConfig nar = config.nar;
    nar.seed = 4;
    const auto bank = fit_models(data.series, data.pairs, {0, data.train_length}, nar);
    const auto spec = scan_windows(data.train_length, nar.lag_order, 10);
    const auto results = test_windows_only(scan(data.series, data.pairs, spec, 1.0, bank), data.train_length);
    std::vector<Window> ws;
    for (const auto& r : results)
        if (ws.empty() || ws.back().start != r.window.start) ws.push_back(r.window);
    const auto labels = label_windows(data.truth, ws);

    std::ostringstream csv;
    write_results_csv(results, csv);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    std::map<std::size_t, bool> detected;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        const std::size_t start = std::stoul(cells[0]);
        detected[start] = detected[start] || cells[7] == "1";
    }
    std::size_t positives = 0, hits = 0, agree = 0;
    for (const auto& [start, det] : detected) {
        bool causal = false;
        for (auto t : data.truth.impulse_times_1to2) causal |= t >= start && t < start + 10;
        for (auto t : data.truth.impulse_times_2to1) causal |= t >= start && t < start + 10;
        positives += causal;
        hits += causal && det;
        agree += causal == det;
    }
    REQUIRE(positives > 0);
    CHECK(*recall(results, labels) == doctest::Approx(static_cast<double>(hits) / positives));
    CHECK(accuracy(results, labels) == doctest::Approx(static_cast<double>(agree) / detected.size()));
}

TEST_CASE("sweep shape, determinism and value ranges") {
    auto config = fast_config();
    const std::vector<std::size_t> ks{10, 20};
    const auto seeds = seed_range(2);
    const auto a = sweep(config, Method::kNaive, ks, seeds);
    config.jobs = 2;
    const auto b = sweep(config, Method::kNaive, ks, seeds);
    CHECK(a.cells.size() == 2);
    CHECK(a.complete);
    const std::vector<EvalReport> ra{a}, rb{b};
    CHECK(report_to_json(ra) == report_to_json(rb));
    for (const auto& c : a.cells) {
        CHECK(c.seeds_ok == 2);
        CHECK(c.accuracy_mean >= 0.0);
        CHECK(c.accuracy_mean <= 1.0);
        CHECK(c.accuracy_std >= 0.0);
        if (c.recall_mean) {
            CHECK(*c.recall_mean >= 0.0);
            CHECK(*c.recall_mean <= 1.0);
        }
    }
    std::ostringstream text;
    write_report_text(ra, text);
    CHECK(text.str().find("k=10") != std::string::npos);
    CHECK(text.str().find("accuracy") != std::string::npos);
}

TEST_CASE("two methods over four lengths give a 2 x 4 report") {
    auto config = fast_config();
    const std::vector<std::size_t> ks{10, 20, 30, 100};
    const auto seeds = seed_range(1);
    const std::vector<EvalReport> reports{sweep(config, Method::kNaive, ks, seeds), sweep(config, Method::kDwgc, ks, seeds)};
    std::size_t cells = 0;
    for (const auto& r : reports) cells += r.cells.size();
    CHECK(cells == 8);
    CHECK(report_to_json(reports).find("\"dwgc\"") != std::string::npos);
}

TEST_CASE("failing seeds are recorded and the report is flagged incomplete") {
    auto config = fast_config();
    config.ar.length = 25;  // too short for the train split
    const std::vector<std::size_t> ks{10};
    const auto r = sweep(config, Method::kNaive, ks, seed_range(2));
    CHECK_FALSE(r.complete);
    CHECK(r.cells[0].seeds_ok == 0);
    CHECK_FALSE(r.cells[0].per_seed[0].ok);
    CHECK_FALSE(r.cells[0].per_seed[0].error.empty());
    CHECK_THROWS_AS(sweep(config, Method::kNaive, ks, std::vector<std::uint64_t>{}), std::invalid_argument);
}

TEST_CASE("scatter has one point per window and seed") {
    auto config = fast_config();
    const std::vector<std::size_t> ks{10, 30};
    const auto seeds = seed_range(3);
    const auto rep = theorem1_check(config, ks, seeds);
    std::size_t expected = 0;
    for (auto seed : seeds) {
        const auto data = prepare(config, seed);
        for (auto k : ks) {
            const auto spec = scan_windows(data.train_length, config.nar.lag_order, k);
            for (const auto& w : windows(data.series.length(), spec)) expected += w.start >= data.train_length ? 1 : 0;
        }
    }
    CHECK(rep.scatter.size() == expected);
    CHECK(rep.rows.size() == 2);
    std::ostringstream csv;
    write_scatter_csv(rep.scatter, csv);
    CHECK(csv.str().rfind("k,seed,window_start,f_statistic,labeled_causal\n", 0) == 0);
}

TEST_CASE("non-decreasing check allows one pooled standard error") {
    std::vector<Theorem1Row> rows(2);
    rows[0].p_hat = 0.60;
    rows[0].std_error = 0.03;
    rows[1].p_hat = 0.57;
    rows[1].std_error = 0.04;
    CHECK(nondecreasing_within_se(rows));
    rows[1].p_hat = 0.54;
    CHECK_FALSE(nondecreasing_within_se(rows));
}

TEST_CASE("uncoupled pair gives a coin-flip exceedance rate at large windows") {
    ExperimentConfig config;
    config.ar.base_coeff = 0.0;
    config.ar.impulse_prob = 0.0;
    const std::vector<std::size_t> ks{30, 100};
    const auto rep = theorem1_check(config, ks, seed_range(20));
    for (const auto& row : rep.rows) {
        CHECK(row.null_reference);
        CHECK(row.p_hat_pair >= 0.35);
        CHECK(row.p_hat_pair <= 0.65);
    }
}
