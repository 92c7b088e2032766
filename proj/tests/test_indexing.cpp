#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dwgc/indexing.hpp"

using namespace dwgc;

namespace {

// Direct evaluation of KL(P || Q) with both sides epsilon-smoothed and normalized.
double kl_oracle(const std::vector<double>& phi, const std::vector<double>& r, double alpha, double eps) {
    std::vector<double> p(phi.size()), q(phi.size());
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        p[i] = phi[i] + eps;
        q[i] = alpha - std::tanh(r[i] * r[i]) + eps;
        sp += p[i];
        sq += q[i];
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) kl += p[i] / sp * std::log((p[i] / sp) / (q[i] / sq));
    return kl;
}

PointLink brute_force(const CausalityIndex& phi, Window w, std::size_t i, std::size_t j) {
    PointLink best;
    best.score = -std::numeric_limits<double>::infinity();
    for (std::size_t t1 = w.start; t1 <= w.end; ++t1)
        for (std::size_t t2 = t1 + 1; t2 <= w.end; ++t2) {
            const double s = phi.at(i, t1) + phi.at(j, t2);
            if (s > best.score) {
                best.score = s;
                best.t1 = t1;
                best.t2 = t2;
            }
        }
    return best;
}

MultiChannelSeries coupled_pair(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> a(n), b(n, 0.0);
    for (auto& v : a) v = g(rng);
    for (std::size_t t = 2; t < n; ++t) b[t] = 0.8 * a[t - 2] + 0.3 * g(rng);
    return MultiChannelSeries({a, b});
}

DwgcOptions small_options(std::uint64_t seed) {
    DwgcOptions o;
    o.windows = {10, 10, 5};
    o.train_length = 100;
    o.nar.lag_order = 3;
    o.nar.hidden_units = 4;
    o.nar.max_epochs = 100;
    o.nar.seed = seed;
    o.indexing.outer_max_iters = 4;
    return o;
}

}  // namespace

TEST_CASE("scaling function values") {
    CHECK(scale_h(0.0) == 1.2);
    CHECK(scale_h(1e6) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(scale_h(1.0) == doctest::Approx(1.2 - std::tanh(1.0)).epsilon(1e-15));
    CHECK(scale_h(1.0) == doctest::Approx(0.438).epsilon(1e-3));
    CHECK(kDefaultAlpha == 1.2);
    CHECK_THROWS_AS(scale_h(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("causality index starts at ones and clamps every write") {
    CausalityIndex phi(2, 5);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 5; ++t) CHECK(phi.at(c, t) == 1.0);
    const auto v = phi.version();
    phi.set(0, 1, 5.0);
    phi.set(1, 2, -3.0);
    CHECK(phi.at(0, 1) == 2.0);
    CHECK(phi.at(1, 2) == 0.1);
    CHECK(phi.version() > v);
}

TEST_CASE("reweighting examples") {
    const MultiChannelSeries ones({std::vector<double>(6, 1.0), std::vector<double>(6, 1.0)});
    const MultiChannelSeries y({{1, -2, 3, 4, 5, 6}, {0.5, 0.25, 8, 1, 2, 3}});
    const CausalityIndex unit(2, 6);
    CHECK(reweight(y, unit).values == y);

    CausalityIndex half(2, 6);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 6; ++t) half.set(c, t, 0.5);
    const auto h = reweight(y, half);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 6; ++t) CHECK(h.values.at(c, t) == y.at(c, t) / 2);
    CHECK(h.phi_version == half.version());

    CausalityIndex single(2, 6);
    single.set(0, 3, 0.1);
    const auto s = reweight(ones, single);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 6; ++t) CHECK(s.values.at(c, t) == (c == 0 && t == 3 ? 0.1 : 1.0));

    CHECK_THROWS_AS(reweight(y, CausalityIndex(2, 5)), std::invalid_argument);
}

TEST_CASE("indexing loss examples") {
    const std::vector<double> flat{1, 1, 1, 1}, same{0.3, 0.3, 0.3, 0.3};
    CHECK(indexing_loss(flat, same) == doctest::Approx(0.0).epsilon(1e-15));

    const std::vector<double> two{1, 1}, outlier{0, 100};
    const double kl = indexing_loss(two, outlier);
    CHECK(kl > 0.0);
    CHECK(kl == doctest::Approx(kl_oracle(two, outlier, 1.2, 1e-8)).epsilon(1e-12));

    const std::vector<double> skew{2, 1}, zeros{0, 0};
    const double expected = 2.0 / 3 * std::log(4.0 / 3) + 1.0 / 3 * std::log(2.0 / 3);
    CHECK(indexing_loss(skew, zeros) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(indexing_loss(skew, zeros) == doctest::Approx(0.0566).epsilon(1e-3));

    CHECK_THROWS_AS(indexing_loss(two, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("indexing loss is nonnegative and zero only for matching profiles") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> phi_u(0.1, 2.0), r_u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> phi(12), r(12);
        for (auto& v : phi) v = phi_u(rng);
        for (auto& v : r) v = r_u(rng);
        const double kl = indexing_loss(phi, r);
        CHECK(kl >= 0.0);
        CHECK(kl == doctest::Approx(kl_oracle(phi, r, 1.2, 1e-8)).epsilon(1e-10));

        // phi proportional to h(r^2) makes the two distributions coincide
        std::vector<double> matched(12);
        for (std::size_t t = 0; t < 12; ++t) matched[t] = 0.7 * scale_h(r[t] * r[t]);
        CHECK(indexing_loss(matched, r) <= 1e-12);
    }
}

TEST_CASE("indexing loss gradient matches central differences") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> phi_u(0.2, 1.9), r_u(-2.0, 2.0);
    for (auto scaling : {ResidualScaling::kHOfSquare, ResidualScaling::kSquareOfH}) {
        for (int i = 0; i < 50; ++i) {
            std::vector<double> phi(10), r(10);
            for (auto& v : phi) v = phi_u(rng);
            for (auto& v : r) v = r_u(rng);
            const auto g = indexing_loss_gradient(phi, r, 1.2, 1e-8, scaling);
            for (std::size_t t = 0; t < phi.size(); ++t) {
                const double h = 1e-6;
                auto up = phi, down = phi;
                up[t] += h;
                down[t] -= h;
                const double fd = (indexing_loss(up, r, 1.2, 1e-8, scaling) - indexing_loss(down, r, 1.2, 1e-8, scaling)) /
                                  (2 * h);
                CHECK(std::abs(g[t] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("index step with no detected windows changes nothing") {
    CausalityIndex phi(2, 20);
    phi.set(0, 4, 1.5);
    const auto next = optimize_phi_step(phi, {}, IndexingConfig{});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 20; ++t) CHECK(next.at(c, t) == phi.at(c, t));
}

TEST_CASE("uniform index with equal residuals is a fixed point") {
    const CausalityIndex phi(1, 20);
    const std::vector<IndexingTerm> terms{{0, {5, 14}, std::vector<double>(10, 0.4)}};
    const auto next = optimize_phi_step(phi, terms, IndexingConfig{});
    for (std::size_t t = 0; t < 20; ++t) CHECK(next.at(0, t) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("an outlier residual lowers its index entry and nothing outside the window moves") {
    const CausalityIndex phi(2, 30);
    std::vector<double> r(10, 0.1);
    r[4] = 5.0;
    const std::vector<IndexingTerm> terms{{1, {10, 19}, r}};
    const auto next = optimize_phi_step(phi, terms, IndexingConfig{});
    CHECK(next.at(1, 14) < 1.0);
    for (std::size_t t = 10; t <= 19; ++t)
        if (t != 14) CHECK(next.at(1, t) > next.at(1, 14));
    for (std::size_t t = 0; t < 30; ++t) {
        CHECK(next.at(0, t) == 1.0);
        if (t < 10 || t > 19) CHECK(next.at(1, t) == 1.0);
    }

    // the step direction agrees with the finite-difference slope at the outlier
    std::vector<double> w(10, 1.0);
    auto up = w, down = w;
    up[4] += 1e-6;
    down[4] -= 1e-6;
    CHECK((indexing_loss(up, r) - indexing_loss(down, r)) > 0.0);
}

TEST_CASE("index stays inside its bounds after many aggressive steps") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> r_u(-4.0, 4.0);
    CausalityIndex phi(2, 40);
    IndexingConfig cfg;
    cfg.phi_learning_rate = 50.0;
    cfg.phi_steps_per_outer = 3;
    for (int step = 0; step < 30; ++step) {
        std::vector<IndexingTerm> terms;
        for (std::size_t c = 0; c < 2; ++c) {
            std::vector<double> r(20);
            for (auto& v : r) v = r_u(rng);
            terms.push_back({c, {10, 29}, r});
        }
        phi = optimize_phi_step(phi, terms, cfg);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t t = 0; t < 40; ++t) {
                CHECK(phi.at(c, t) >= 0.1);
                CHECK(phi.at(c, t) <= 2.0);
            }
    }
}

TEST_CASE("regularizer examples") {
    CHECK(regularizer_parts(std::vector<double>(8, 1.3)).smoothness == 0.0);
    const std::vector<double> phi{1, 1.4, 1, 1};
    CHECK(regularizer_parts(phi).smoothness == doctest::Approx(0.4));
    CHECK(regularizer_value(phi, 2.5, 0.0) == doctest::Approx(0.4 * 2.5));

    const std::vector<double> near{1.0, 1.0, 1.0 + 1e-13, 1.0 + 1e-13, 1.0 - 1e-13, 1.0 - 1e-13};
    const auto parts = regularizer_parts(near);
    CHECK(std::isfinite(parts.relu));
    CHECK(parts.relu >= 0.0);
    CHECK(parts.relu <= 1e6);
    CHECK(std::isfinite(regularizer_value(near, 1.0, 1.0)));

    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> w(10);
        for (auto& v : w) v = u(rng);
        const auto p = regularizer_parts(w);
        CHECK(std::isfinite(p.relu));
        CHECK(p.relu >= 0.0);
        CHECK(p.relu <= 1e6);
    }
}

TEST_CASE("enabled regularizer adds to the total loss") {
    CausalityIndex phi(1, 10);
    phi.set(0, 0, 1.4);
    const std::vector<IndexingTerm> terms{{0, {0, 3}, std::vector<double>(4, 0.0)}};
    IndexingConfig off, on;
    on.regularizer = Regularizer::kSmoothness;
    on.reg_alpha_s = 2.0;
    CHECK(total_indexing_loss(phi, terms, on) == doctest::Approx(total_indexing_loss(phi, terms, off) + 0.8));
}

TEST_CASE("point links: tie break, ordered peaks, reversed peaks") {
    CausalityIndex flat(2, 12);
    const auto tie = locate_points(flat, {3, 9}, 0, 1);
    CHECK(tie.t1 == 3);
    CHECK(tie.t2 == 4);

    CausalityIndex peaks(2, 12);
    peaks.set(0, 5, 1.8);
    peaks.set(1, 8, 1.9);
    const auto ordered = locate_points(peaks, {3, 9}, 0, 1);
    CHECK(ordered.t1 == 5);
    CHECK(ordered.t2 == 8);
    CHECK(ordered.score == doctest::Approx(3.7));

    CausalityIndex reversed(2, 12);
    reversed.set(0, 8, 1.8);
    reversed.set(1, 5, 1.9);
    const auto r = locate_points(reversed, {3, 9}, 0, 1);
    const auto b = brute_force(reversed, {3, 9}, 0, 1);
    CHECK(r.t1 < r.t2);
    CHECK(r.t1 == b.t1);
    CHECK(r.t2 == b.t2);
    CHECK(r.score == b.score);

    CHECK_THROWS_AS(locate_points(flat, {4, 4}, 0, 1), std::invalid_argument);
}

TEST_CASE("point links agree with exhaustive search on random indices") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    std::uniform_int_distribution<std::size_t> k_dist(2, 64);
    std::bernoulli_distribution coarse(0.5);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t k = k_dist(rng);
        CausalityIndex phi(2, k + 5);
        const bool quantize = coarse(rng);  // force plenty of ties half the time
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t t = 0; t < k + 5; ++t) phi.set(c, t, quantize ? std::round(u(rng) * 2) / 2 : u(rng));
        const Window w{3, 3 + k - 1};
        const auto fast = locate_points(phi, w, 0, 1);
        const auto slow = brute_force(phi, w, 0, 1);
        CHECK(fast.t1 == slow.t1);
        CHECK(fast.t2 == slow.t2);
        CHECK(fast.score == slow.score);
    }
}

TEST_CASE("inverse reading picks the smallest weights") {
    CausalityIndex phi(2, 10);
    phi.set(0, 2, 0.1);
    phi.set(1, 6, 0.2);
    const auto link = locate_points(phi, {0, 9}, 0, 1, LinkReading::kPeakInversePhi);
    CHECK(link.t1 == 2);
    CHECK(link.t2 == 6);
    CHECK(link.score == doctest::Approx(15.0));
}

TEST_CASE("a frozen index reproduces the naive scan exactly") {
    const auto s = coupled_pair(200, 12);
    const auto pairs = ordered_pairs(2);
    for (std::size_t iters : {1u, 3u}) {
        auto opt = small_options(5);
        opt.indexing.phi_learning_rate = 0.0;
        opt.indexing.outer_max_iters = iters;
        const auto dw = run_dwgc(s, pairs, opt);
        const auto naive = run_naive(s, pairs, opt);
        CHECK(results_to_json(dw.results) == results_to_json(naive));
        std::ostringstream a, b;
        write_results_csv(dw.results, a);
        write_results_csv(naive, b);
        CHECK(a.str() == b.str());
        for (std::size_t t = 0; t < s.length(); ++t) CHECK(dw.phi.at(0, t) == 1.0);
    }
}

TEST_CASE("standardized residuals make the index invariant to the series scale") {
    const auto s = coupled_pair(200, 14);
    std::vector<std::vector<double>> big(2);
    for (std::size_t c = 0; c < 2; ++c)
        for (double v : s.channel(c)) big[c].push_back(1000.0 * v);
    const MultiChannelSeries scaled(big);
    const auto pairs = ordered_pairs(2);
    const auto opt = small_options(7);
    const auto a = run_dwgc(s, pairs, opt);
    const auto b = run_dwgc(scaled, pairs, opt);
    double moved = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t t = 0; t < s.length(); ++t) {
            CHECK(b.phi.at(c, t) == doctest::Approx(a.phi.at(c, t)).epsilon(1e-6));
            moved = std::max(moved, std::abs(a.phi.at(c, t) - 1.0));
        }
    }
    CHECK(moved > 1e-4);

    auto raw = opt;
    raw.indexing.residual_units = ResidualUnits::kOriginal;
    const auto c = run_dwgc(scaled, pairs, raw);
    double raw_moved = 0.0;
    for (std::size_t t = 0; t < s.length(); ++t) raw_moved = std::max(raw_moved, std::abs(c.phi.at(0, t) - 1.0));
    CHECK(raw_moved < moved);
}

TEST_CASE("alternating loop records a trace and emits links for causal results") {
    const auto s = coupled_pair(200, 13);
    const auto pairs = ordered_pairs(2);
    const auto r = run_dwgc(s, pairs, small_options(6));
    CHECK(!r.trace.empty());
    CHECK(r.trace.size() <= 4);
    CHECK(r.trace.front().iteration == 1);
    std::size_t causal = 0;
    for (const auto& w : r.results) causal += w.causal ? 1 : 0;
    CHECK(r.links.size() == causal);
    for (const auto& l : r.links) {
        CHECK(l.t1 < l.t2);
        CHECK(l.window.contains(l.t1));
        CHECK(l.window.contains(l.t2));
        CHECK(l.score == doctest::Approx(r.phi.at(l.source, l.t1) + r.phi.at(l.target, l.t2)));
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < s.length(); ++t) {
            CHECK(r.phi.at(c, t) >= 0.1);
            CHECK(r.phi.at(c, t) <= 2.0);
        }

    const auto again = run_dwgc(s, pairs, small_options(6));
    CHECK(results_to_json(again.results) == results_to_json(r.results));

    std::ostringstream links, trace;
    write_links_csv(r.links, links);
    write_trace_jsonl(r.trace, trace);
    CHECK(links.str().rfind("i,t1,j,t2,score\n", 0) == 0);
    CHECK(trace.str().find("\"nar_mse\"") != std::string::npos);
}
