#include "gvi2d/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gvi2d/optim.hpp"

namespace gvi2d {

namespace {

double median_of(std::vector<double> v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

void require_finite(const std::vector<double>& samples) {
  for (double s : samples)
    if (!std::isfinite(s)) throw DataError("noise fit: non-finite sample");
}

double sample_variance(const std::vector<double>& samples) {
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  double acc = 0.0;
  for (double s : samples) acc += (s - mean) * (s - mean);
  const double var = acc / samples.size();
  // constant data can leave round-off dust; treat it as exactly degenerate
  return var <= 1e-20 * (1.0 + mean * mean) ? 0.0 : var;
}

thread_local std::vector<double> g_em_trace;

}  // namespace

void validate(const NoiseModel& model) {
  std::visit([](const auto& p) {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      if (!(p.variance > 0.0) || !std::isfinite(p.variance))
        throw ConfigError("gaussian: variance must be positive");
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.lambda))
        throw ConfigError("skew_laplace: sigma must be positive, lambda finite");
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      if (!(p.c_minus > 0.0) || !(p.c_plus > 0.0) || !std::isfinite(p.c_minus) ||
          !std::isfinite(p.c_plus))
        throw ConfigError("asym_cauchy: scales must be positive");
    } else {
      if (p.components.empty()) throw ConfigError("gmm: no components");
      double wsum = 0.0;
      for (const GmmComponent& c : p.components) {
        if (!(c.weight >= 0.0) || !std::isfinite(c.mean) || !(c.variance > 0.0))
          throw ConfigError("gmm: weights must be >= 0, variances positive");
        wsum += c.weight;
      }
      if (std::abs(wsum - 1.0) > 1e-12) throw ConfigError("gmm: weights must sum to 1");
    }
  }, model);
}

// ---------------------------------------------------------- derivatives ----

namespace {

/// Responsibilities γ_j(r) and the pieces of dφ/dr for a mixture.
struct GmmLocal {
  double dphi;    // Σ γ_j (r-μ_j)/Σ_j
  double ddphi;   // Σ γ_j (1/Σ_j - a_j²) + dphi²
};

GmmLocal gmm_derivatives(double r, const GmmParams& p) {
  double max_term = -std::numeric_limits<double>::infinity();
  for (const GmmComponent& c : p.components) max_term = std::max(max_term, gmm_log_term(r, c));
  double norm = 0.0;
  for (const GmmComponent& c : p.components) norm += std::exp(gmm_log_term(r, c) - max_term);

  double dphi = 0.0, curv = 0.0;
  for (const GmmComponent& c : p.components) {
    const double gamma = std::exp(gmm_log_term(r, c) - max_term) / norm;
    const double a = (r - c.mean) / c.variance;
    dphi += gamma * a;
    curv += gamma * (1.0 / c.variance - a * a);
  }
  return {dphi, curv + dphi * dphi};
}

}  // namespace

double d_energy(const NoiseModel& m, double r) {
  return std::visit([r](const auto& p) -> double {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      return r / p.variance;
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      const double sgn = r < 0.0 ? -1.0 : 1.0;  // right limit at the kink
      return p.alpha() * sgn / p.sigma - p.lambda / (p.sigma * p.sigma);
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      const double c = r < 0.0 ? p.c_minus : p.c_plus;
      return 2.0 * r / (c * c + r * r);
    } else {
      return gmm_derivatives(r, p).dphi;
    }
  }, m);
}

double dd_energy(const NoiseModel& m, double r) {
  return std::visit([r](const auto& p) -> double {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      return 1.0 / p.variance;
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      (void)p;
      return 0.0;  // piecewise linear away from the kink
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      const double c = r < 0.0 ? p.c_minus : p.c_plus;
      const double den = c * c + r * r;
      return 2.0 * (c * c - r * r) / (den * den);
    } else {
      return gmm_derivatives(r, p).ddphi;
    }
  }, m);
}

double gn_curvature(const NoiseModel& m, double r) {
  return std::visit([r](const auto& p) -> double {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      return 1.0 / p.variance;
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      // L1-style IRLS weight dφ/dr / r; |r| clamped near the kink where the
      // exact weight diverges. Both one-sided slopes are positive for every
      // valid (σ, λ), so the weight is too.
      const double slope = r < 0.0 ? p.alpha() / p.sigma + p.lambda / (p.sigma * p.sigma)
                                   : p.alpha() / p.sigma - p.lambda / (p.sigma * p.sigma);
      return slope / std::max(std::abs(r), 1e-3 * p.sigma);
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      const double c = r < 0.0 ? p.c_minus : p.c_plus;
      return 2.0 / (c * c + r * r);
    } else {
      // Jensen majorizer of the mixture NLL: quadratic with curvature
      // Σ_j γ_j / Σ_j, tangent to φ at r, and an upper bound everywhere.
      double max_term = -std::numeric_limits<double>::infinity();
      for (const GmmComponent& c : p.components)
        max_term = std::max(max_term, gmm_log_term(r, c));
      double norm = 0.0;
      for (const GmmComponent& c : p.components)
        norm += std::exp(gmm_log_term(r, c) - max_term);
      double w = 0.0;
      for (const GmmComponent& c : p.components)
        w += std::exp(gmm_log_term(r, c) - max_term) / norm / c.variance;
      return w;
    }
  }, m);
}

// ------------------------------------------------------------- densities ---

double log_pdf(const NoiseModel& m, double r) {
  return std::visit([r](const auto& p) -> double {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      return -0.5 * std::log(2.0 * M_PI * p.variance) - gaussian_energy(r, p);
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      return -std::log(2.0 * p.sigma * p.alpha()) - skew_laplace_energy(r, p);
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      return std::log(p.alpha()) - asym_cauchy_energy(r, p);
    } else {
      return -gmm_energy(r, p);
    }
  }, m);
}

double log_likelihood(const NoiseModel& m, const std::vector<double>& samples) {
  double acc = 0.0;
  for (double s : samples) acc += log_pdf(m, s);
  return acc;
}

// -------------------------------------------------------------- sampling ---

double sample(const NoiseModel& m, Rng& rng) {
  return std::visit([&rng](const auto& p) -> double {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      return rng.normal(0.0, std::sqrt(p.variance));
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      // Two-sided exponential: decay rate a⁺ = α/σ − λ/σ² to the right,
      // a⁻ = α/σ + λ/σ² to the left (both positive since α > |λ|/σ), with
      // mass a⁻/(a⁺+a⁻) on r ≥ 0.
      const double s2 = p.sigma * p.sigma;
      const double a_plus = p.alpha() / p.sigma - p.lambda / s2;
      const double a_minus = p.alpha() / p.sigma + p.lambda / s2;
      if (rng.uniform() < a_minus / (a_plus + a_minus)) return rng.exponential(a_plus);
      return -rng.exponential(a_minus);
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      // branch mass c⁺/(c⁺+c⁻); half-Cauchy inverse CDF |r| = c·tan(πu/2)
      const bool positive = rng.uniform() < p.c_plus / (p.c_plus + p.c_minus);
      const double c = positive ? p.c_plus : p.c_minus;
      const double mag = c * std::tan(0.5 * M_PI * rng.uniform());
      return positive ? mag : -mag;
    } else {
      double u = rng.uniform();
      const GmmComponent* chosen = &p.components.back();
      for (const GmmComponent& c : p.components) {
        if (u < c.weight) {
          chosen = &c;
          break;
        }
        u -= c.weight;
      }
      return rng.normal(chosen->mean, std::sqrt(chosen->variance));
    }
  }, m);
}

// --------------------------------------------------------------- fitting ---

GaussianParams fit_gaussian(const std::vector<double>& samples) {
  if (samples.empty()) throw LengthMismatch("fit_gaussian: no samples");
  require_finite(samples);
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  const double variance = acc / samples.size();
  if (!(variance > 0.0)) throw DegenerateData("fit_gaussian: all samples are zero");
  return {variance};
}

SkewLaplaceParams fit_skew_laplace(const std::vector<double>& samples) {
  if (samples.size() < 100) throw LengthMismatch("fit_skew_laplace: need at least 100 samples");
  require_finite(samples);
  if (sample_variance(samples) <= 0.0)
    throw DegenerateData("fit_skew_laplace: zero sample variance");

  const double n = static_cast<double>(samples.size());
  double sum_abs = 0.0, sum = 0.0, mean = 0.0;
  for (double s : samples) {
    sum_abs += std::abs(s);
    sum += s;
  }
  mean = sum / n;
  double m3 = 0.0;
  for (double s : samples) m3 += std::pow(s - mean, 3);

  // NLL has sufficient statistics Σ|r| and Σr:
  //   n·ln(2σα) + α·Σ|r|/σ − λ·Σr/σ²
  const auto nll = [&](const Eigen::VectorXd& x) {
    const double sigma = std::exp(x(0));
    const SkewLaplaceParams p{sigma, x(1)};
    return n * std::log(2.0 * sigma * p.alpha()) + p.alpha() * sum_abs / sigma -
           x(1) * sum / (sigma * sigma);
  };

  // MAD/ln2 estimates the Laplace scale; a small λ with the sample skew's
  // sign breaks the symmetry in the right direction.
  std::vector<double> dev(samples.size());
  const double med = median_of(samples);
  for (size_t i = 0; i < samples.size(); ++i) dev[i] = std::abs(samples[i] - med);
  const double sigma0 = std::max(median_of(dev) / std::log(2.0), 1e-12);
  const double lambda0 = 0.05 * sigma0 * (m3 > 0.0 ? 1.0 : (m3 < 0.0 ? -1.0 : 0.0));

  Eigen::VectorXd x0(2);
  x0 << std::log(sigma0), lambda0;
  const NelderMeadResult r = nelder_mead(nll, x0, 0.25, 1e-9, 2000);

  // never return worse than the initial guess
  if (r.f <= nll(x0)) return {std::exp(r.x(0)), r.x(1)};
  return {sigma0, lambda0};
}

AsymCauchyParams fit_asym_cauchy(const std::vector<double>& samples) {
  if (samples.size() < 100) throw LengthMismatch("fit_asym_cauchy: need at least 100 samples");
  require_finite(samples);
  if (sample_variance(samples) <= 0.0)
    throw DegenerateData("fit_asym_cauchy: zero sample variance");

  std::vector<double> neg, pos;
  for (double s : samples) (s < 0.0 ? neg : pos).push_back(std::abs(s));

  const double n = static_cast<double>(samples.size());
  const auto nll = [&](const Eigen::VectorXd& x) {
    const double cm = std::exp(x(0)), cp = std::exp(x(1));
    double acc = n * std::log(0.5 * M_PI * (cm + cp));
    for (double a : neg) acc += std::log1p((a / cm) * (a / cm));
    for (double a : pos) acc += std::log1p((a / cp) * (a / cp));
    return acc;
  };

  // median of each half-sample estimates that branch's scale (the median of
  // a half-Cauchy is exactly c)
  std::vector<double> all_abs;
  all_abs.reserve(samples.size());
  for (double s : samples) all_abs.push_back(std::abs(s));
  const double fallback = std::max(median_of(all_abs), 1e-12);
  const double cm0 = neg.size() >= 10 ? std::max(median_of(neg), 1e-12) : fallback;
  const double cp0 = pos.size() >= 10 ? std::max(median_of(pos), 1e-12) : fallback;

  Eigen::VectorXd x0(2);
  x0 << std::log(cm0), std::log(cp0);
  const NelderMeadResult r = nelder_mead(nll, x0, 0.25, 1e-9, 2000);

  if (r.f <= nll(x0)) return {std::exp(r.x(0)), std::exp(r.x(1))};
  return {cm0, cp0};
}

GmmParams fit_gmm_em(const std::vector<double>& samples, int n_components, std::uint64_t seed) {
  if (n_components < 1) throw LengthMismatch("fit_gmm_em: need at least one component");
  if (samples.size() < 10 * static_cast<size_t>(n_components))
    throw LengthMismatch("fit_gmm_em: need at least 10 samples per component");
  require_finite(samples);

  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  const double var = sample_variance(samples);
  if (var <= 0.0) throw DegenerateData("fit_gmm_em: zero sample variance");

  g_em_trace.clear();

  if (n_components == 1) {
    g_em_trace.push_back(log_likelihood(GmmParams{{{1.0, mean, var}}}, samples));
    return GmmParams{{{1.0, mean, var}}};
  }

  // Quantile-spread means for the first attempt; jittered restarts after a
  // component collapse.
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  Rng rng(seed);

  for (int attempt = 0; attempt < 6; ++attempt) {
    GmmParams p;
    for (int j = 0; j < n_components; ++j) {
      const double q = (j + 0.5) / n_components;
      double mu = sorted[static_cast<size_t>(q * (n - 1))];
      if (attempt > 0) mu += rng.normal(0.0, std::sqrt(var));
      p.components.push_back({1.0 / n_components, mu, var});
    }

    g_em_trace.clear();
    bool collapsed = false;
    double prev_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> gamma(samples.size() * n_components);

    for (int iter = 0; iter < 500 && !collapsed; ++iter) {
      // E-step: responsibilities, and the log-likelihood for free
      double ll = 0.0;
      for (size_t i = 0; i < samples.size(); ++i) {
        const double e = gmm_energy(samples[i], p);
        ll -= e;
        for (int j = 0; j < n_components; ++j)
          gamma[i * n_components + j] = std::exp(gmm_log_term(samples[i], p.components[j]) + e);
      }
      g_em_trace.push_back(ll);
      const bool done = (ll - prev_ll) < 1e-8 && iter > 0;
      prev_ll = ll;
      if (done) break;

      // M-step
      for (int j = 0; j < n_components; ++j) {
        double nj = 0.0, mu = 0.0;
        for (size_t i = 0; i < samples.size(); ++i) nj += gamma[i * n_components + j];
        if (nj < 1e-12 * n) {
          collapsed = true;
          break;
        }
        for (size_t i = 0; i < samples.size(); ++i) mu += gamma[i * n_components + j] * samples[i];
        mu /= nj;
        double v = 0.0;
        for (size_t i = 0; i < samples.size(); ++i)
          v += gamma[i * n_components + j] * (samples[i] - mu) * (samples[i] - mu);
        v /= nj;
        if (v < 1e-12) {
          collapsed = true;
          break;
        }
        p.components[j] = {nj / n, mu, v};
      }
    }

    if (!collapsed) {
      std::sort(p.components.begin(), p.components.end(),
                [](const GmmComponent& a, const GmmComponent& b) { return a.mean < b.mean; });
      double wsum = 0.0;
      for (const GmmComponent& c : p.components) wsum += c.weight;
      for (GmmComponent& c : p.components) c.weight /= wsum;
      return p;
    }
  }
  throw DegenerateData("fit_gmm_em: component collapsed in every restart");
}

const std::vector<double>& last_em_trace() { return g_em_trace; }

// ----------------------------------------------------------------- JSON ----

nlohmann::json noise_to_json(const NoiseModel& m) {
  return std::visit([](const auto& p) -> nlohmann::json {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, GaussianParams>) {
      return {{"type", "gaussian"}, {"params", {{"variance", p.variance}}}};
    } else if constexpr (std::is_same_v<T, SkewLaplaceParams>) {
      return {{"type", "skew_laplace"}, {"params", {{"sigma", p.sigma}, {"lambda", p.lambda}}}};
    } else if constexpr (std::is_same_v<T, AsymCauchyParams>) {
      return {{"type", "asym_cauchy"},
              {"params", {{"c_minus", p.c_minus}, {"c_plus", p.c_plus}}}};
    } else {
      nlohmann::json comps = nlohmann::json::array();
      for (const GmmComponent& c : p.components)
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
      return {{"type", "gmm"}, {"params", {{"components", comps}}}};
    }
  }, m);
}

NoiseModel noise_from_json(const nlohmann::json& j) {
  NoiseModel m;
  try {
    const std::string type = j.at("type").get<std::string>();
    const nlohmann::json& p = j.at("params");
    if (type == "gaussian") {
      m = GaussianParams{p.at("variance").get<double>()};
    } else if (type == "skew_laplace") {
      m = SkewLaplaceParams{p.at("sigma").get<double>(), p.at("lambda").get<double>()};
    } else if (type == "asym_cauchy") {
      m = AsymCauchyParams{p.at("c_minus").get<double>(), p.at("c_plus").get<double>()};
    } else if (type == "gmm") {
      GmmParams g;
      for (const nlohmann::json& c : p.at("components"))
        g.components.push_back({c.at("weight").get<double>(), c.at("mean").get<double>(),
                                c.at("variance").get<double>()});
      m = g;
    } else {
      throw ConfigError("unknown noise model type: " + type);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed noise model JSON: ") + e.what());
  }
  validate(m);
  return m;
}

}  // namespace gvi2d
