#include "dwgc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace dwgc {

double NoiseDecompSample::ratio() const {
    const double quad = error_square + noise_square;
    return quad > 0.0 ? std::abs(cross_term) / quad : 0.0;
}

namespace {

NoiseDecompSample draw(std::size_t k, double sigma0, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    NoiseDecompSample s;
    s.k = k;
    s.sigma0 = sigma0;
    for (std::size_t t = 0; t < k; ++t) {
        const double gamma = normal(rng);
        const double err = sigma0 * normal(rng);
        s.cross_term += 2.0 * gamma * err;
        s.error_square += err * err;
        s.noise_square += gamma * gamma;
    }
    return s;
}

}  // namespace

NoiseDecompSample sample_noise_decomposition(std::size_t k, double sigma0, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return draw(k, sigma0, rng);
}

CrossTermSummary cross_term_ratio(std::size_t k, double sigma0, std::size_t n_samples, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("cross_term_ratio: k must be >= 2");
    if (n_samples < 1000) throw std::invalid_argument("cross_term_ratio: need at least 1000 samples");
    if (!(sigma0 >= 0.0)) throw std::invalid_argument("cross_term_ratio: sigma0 must be >= 0");

    std::mt19937_64 rng(seed);
    std::vector<double> ratios(n_samples);
    double sum = 0.0;
    for (auto& r : ratios) {
        r = draw(k, sigma0, rng).ratio();
        sum += r;
    }
    CrossTermSummary out;
    out.k = k;
    out.sigma0 = sigma0;
    out.samples = n_samples;
    out.mean = sum / static_cast<double>(n_samples);
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n_samples))) - 1;
    std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(idx), ratios.end());
    out.p95 = ratios[idx];
    return out;
}

ChiSquareMoments chi_square_moments(std::size_t k, std::size_t n_samples, std::uint64_t seed) {
    if (k < 1 || n_samples < 2) throw std::invalid_argument("chi_square_moments: need k >= 1 and n_samples >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Welford accumulation.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 1; i <= n_samples; ++i) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            const double g = normal(rng);
            s += g * g;
        }
        const double delta = s - mean;
        mean += delta / static_cast<double>(i);
        m2 += delta * (s - mean);
    }
    return {k, n_samples, mean, m2 / static_cast<double>(n_samples - 1)};
}

std::string cross_term_to_json(std::span<const CrossTermSummary> summaries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : summaries) {
        arr.push_back({{"k", s.k}, {"sigma0", s.sigma0}, {"samples", s.samples}, {"mean", s.mean}, {"p95", s.p95}});
    }
    return nlohmann::json{{"cross_term", std::move(arr)}}.dump(2);
}

}  // namespace dwgc
