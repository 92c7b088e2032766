#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace dwgc {

/**
 * One simulated window under the noise decomposition Y = Y_real + gamma with
 * unit-normal gamma and forecast error e = Yhat - Y_real ~ N(0, sigma0^2).
 */
struct NoiseDecompSample {
    std::size_t k = 0;
    double sigma0 = 0.0;
    double cross_term = 0.0;     ///< 2 * sum gamma * e
    double error_square = 0.0;   ///< sum e^2
    double noise_square = 0.0;   ///< sum gamma^2

    /// |cross| / (sum e^2 + sum gamma^2)
    double ratio() const;
};

NoiseDecompSample sample_noise_decomposition(std::size_t k, double sigma0, std::uint64_t seed);

struct CrossTermSummary {
    std::size_t k = 0;
    double sigma0 = 0.0;
    std::size_t samples = 0;
    double mean = 0.0;
    double p95 = 0.0;
};

/// Monte Carlo summary of the omitted cross term relative to the retained quadratic terms.
CrossTermSummary cross_term_ratio(std::size_t k, double sigma0, std::size_t n_samples, std::uint64_t seed = 0);

struct ChiSquareMoments {
    std::size_t k = 0;
    std::size_t samples = 0;
    double mean = 0.0;
    double variance = 0.0;
};

/// Sample mean and variance of sum_{t<k} gamma_t^2 over n_samples draws.
ChiSquareMoments chi_square_moments(std::size_t k, std::size_t n_samples, std::uint64_t seed = 0);

std::string cross_term_to_json(std::span<const CrossTermSummary> summaries);

}  // namespace dwgc
