#pragma once

#include <cmath>
#include <variant>

#include <boost/math/distributions/normal.hpp>

#include "msim/core/error.hpp"
#include "msim/core/latent_draws.hpp"

namespace msim {

inline double uniform_draw(std::uint64_t seed, IndividualId id, TimeStep t,
                           StreamTag tag, std::uint32_t index) {
  return LatentDraws(seed).uniform(id, t, tag, index);
}

inline double inv_logit(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace dist {

struct Bernoulli {
  double p;
};
struct Exponential {
  double rate;
};
struct Normal {
  double mean = 0.0;
  double sd = 1.0;
};
/// F(x) = 1 - exp(-(x / scale)^shape)
struct Weibull {
  double shape;
  double scale;
};

using Distribution = std::variant<Bernoulli, Exponential, Normal, Weibull>;

inline double inverse_cdf(double u, const Bernoulli& d) {
  if (!(d.p >= 0.0 && d.p <= 1.0)) throw NumericError("bernoulli p outside [0,1]");
  return u < d.p ? 1.0 : 0.0;
}

inline double inverse_cdf(double u, const Exponential& d) {
  if (!(d.rate > 0.0)) throw NumericError("exponential rate must be positive");
  return -std::log1p(-u) / d.rate;
}

inline double inverse_cdf(double u, const Normal& d) {
  if (!(d.sd >= 0.0)) throw NumericError("normal sd must be non-negative");
  if (d.sd == 0.0) return d.mean;
  // u == 0 would map to -inf; the smallest 53-bit draw above zero is used.
  constexpr double kTiny = 0x1.0p-54;
  double v = u < kTiny ? kTiny : u;
  return boost::math::quantile(boost::math::normal_distribution<>(d.mean, d.sd), v);
}

inline double inverse_cdf(double u, const Weibull& d) {
  if (!(d.shape > 0.0) || !(d.scale > 0.0)) {
    throw NumericError("weibull shape and scale must be positive");
  }
  return d.scale * std::pow(-std::log1p(-u), 1.0 / d.shape);
}

inline double weibull_cdf(double x, const Weibull& d) {
  if (!(d.shape > 0.0) || !(d.scale > 0.0)) {
    throw NumericError("weibull shape and scale must be positive");
  }
  if (x <= 0.0) return 0.0;
  return -std::expm1(-std::pow(x / d.scale, d.shape));
}

}  // namespace dist

/// Inverse-CDF transform of a uniform draw.
inline double draw_transform(double u, const dist::Distribution& d) {
  return std::visit([u](const auto& x) { return dist::inverse_cdf(u, x); }, d);
}

}  // namespace msim
