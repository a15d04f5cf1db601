#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gvi2d/common.hpp"
#include "gvi2d/rng.hpp"

namespace gvi2d {

// Scalar measurement-noise models and their negative-log energies φ(r).
//
// Energies drop additive constants where the underlying density has a simple
// normalizer (Gaussian, Skew-Laplace, asymmetric Cauchy); the mixture keeps
// its full negative log density because its normalizer depends on the
// parameters in a non-separable way. Consequence: MAP objective values are
// comparable only within a single model family.

/// Zero-mean Gaussian with variance Σ.
struct GaussianParams {
  double variance = 1.0;
};

/// Skew-Laplace SL(σ, λ): p(r) = exp(λ·r/σ² − α·|r|/σ) / (2σα),
/// α = sqrt(1 + (λ/σ)²). λ > 0 skews the density to the right.
struct SkewLaplaceParams {
  double sigma = 1.0;
  double lambda = 0.0;
  double alpha() const { return std::sqrt(1.0 + (lambda / sigma) * (lambda / sigma)); }
};

/// Asymmetric Cauchy: p(r) = α / (1 + (r/c⁻)²) for r < 0, branch c⁺ for
/// r ≥ 0, with α = 2/[π(c⁺ + c⁻)] making the two half-densities integrate
/// to one.
struct AsymCauchyParams {
  double c_minus = 1.0;
  double c_plus = 1.0;
  double alpha() const { return 2.0 / (M_PI * (c_plus + c_minus)); }
};

struct GmmComponent {
  double weight;
  double mean;
  double variance;
};

/// Scalar Gaussian mixture Σ_j w_j N(r | μ_j, Σ_j), Σ w_j = 1.
struct GmmParams {
  std::vector<GmmComponent> components;
};

using NoiseModel = std::variant<GaussianParams, SkewLaplaceParams, AsymCauchyParams, GmmParams>;

/// Throws ConfigError unless the parameters satisfy the model invariants
/// (positive scales, weights summing to one, ...).
void validate(const NoiseModel& model);

// ------------------------------------------------------------- energies ----

inline double gaussian_energy(double r, const GaussianParams& p) {
  return 0.5 * r * r / p.variance;
}

inline double skew_laplace_energy(double r, const SkewLaplaceParams& p) {
  return p.alpha() * std::abs(r) / p.sigma - p.lambda * r / (p.sigma * p.sigma);
}

inline double asym_cauchy_energy(double r, const AsymCauchyParams& p) {
  const double c = r < 0.0 ? p.c_minus : p.c_plus;
  return std::log1p((r / c) * (r / c));
}

/// ln w_j + ln N(r | μ_j, Σ_j) for one mixture component.
inline double gmm_log_term(double r, const GmmComponent& c) {
  const double e = r - c.mean;
  return std::log(c.weight) - 0.5 * std::log(2.0 * M_PI * c.variance) - 0.5 * e * e / c.variance;
}

inline double gmm_energy(double r, const GmmParams& p) {
  // -ln Σ w_j N(r | μ_j, Σ_j) via log-sum-exp
  double max_term = -std::numeric_limits<double>::infinity();
  for (const GmmComponent& c : p.components) max_term = std::max(max_term, gmm_log_term(r, c));
  double acc = 0.0;
  for (const GmmComponent& c : p.components) acc += std::exp(gmm_log_term(r, c) - max_term);
  return -max_term - std::log(acc);
}

inline double energy(const NoiseModel& m, double r) {
  return std::visit([r](const auto& p) -> double {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) return gaussian_energy(r, p);
    else if constexpr (std::is_same_v<T, SkewLaplaceParams>) return skew_laplace_energy(r, p);
    else if constexpr (std::is_same_v<T, AsymCauchyParams>) return asym_cauchy_energy(r, p);
    else return gmm_energy(r, p);
  }, m);
}

// ---------------------------------------------------------- derivatives ----
// dφ/dr and d²φ/dr², used by the MAP baselines (never by the variational
// solver, which only evaluates φ). Kinked models use the right limit at 0.

double d_energy(const NoiseModel& m, double r);
double dd_energy(const NoiseModel& m, double r);

/// Strictly positive curvature surrogate for Gauss-Newton steps on scalar
/// residuals: exact 1/σ² for the Gaussian, the IRLS weight dφ/dr / r for the
/// asymmetric Cauchy (bounded, positive), the EM-majorizer curvature
/// Σ_j γ_j(r)/Σ_j for a mixture (the true d²φ/dr² can be negative), and the
/// kink-clamped L1 weight for the Skew-Laplace.
double gn_curvature(const NoiseModel& m, double r);

// ------------------------------------------------------------- densities ---

double log_pdf(const NoiseModel& m, double r);
inline double pdf(const NoiseModel& m, double r) { return std::exp(log_pdf(m, r)); }

/// Σ_i ln p(r_i); the quantity maximized by the fit_* routines.
double log_likelihood(const NoiseModel& m, const std::vector<double>& samples);

// -------------------------------------------------------------- sampling ---

/// One exact draw from the model.
double sample(const NoiseModel& m, Rng& rng);

// --------------------------------------------------------------- fitting ---

/// Zero-mean Gaussian MLE: variance = mean of r².
GaussianParams fit_gaussian(const std::vector<double>& samples);

/// Maximum likelihood over (ln σ, λ) by Nelder-Mead, initialized from the
/// sample MAD and the sign of the sample skew. The returned likelihood is
/// never below the initial guess's.
SkewLaplaceParams fit_skew_laplace(const std::vector<double>& samples);

/// Maximum likelihood over (ln c⁻, ln c⁺) by Nelder-Mead.
AsymCauchyParams fit_asym_cauchy(const std::vector<double>& samples);

/// EM for a scalar mixture. Stops when the log-likelihood gain drops below
/// 1e-8 or after 500 iterations; restarts with jittered means (up to 5
/// times) if a component collapses, then throws DegenerateData. Components
/// are sorted by mean ascending for deterministic serialization.
GmmParams fit_gmm_em(const std::vector<double>& samples, int n_components, std::uint64_t seed);

/// Per-iteration log-likelihood trace of the last fit_gmm_em call on this
/// thread (monotone non-decreasing by the EM property; exposed for tests).
const std::vector<double>& last_em_trace();

// ----------------------------------------------------------------- JSON ----

/// {"type": ..., "params": {...}}; doubles round-trip bit-exactly.
nlohmann::json noise_to_json(const NoiseModel& m);
NoiseModel noise_from_json(const nlohmann::json& j);

}  // namespace gvi2d
