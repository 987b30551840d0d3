#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "msim/core/error.hpp"

namespace msim {

struct NelderMeadOptions {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  /// Initial simplex step per coordinate: max(relative_step |x0_i|, absolute_step).
  double relative_step = 0.05;
  double absolute_step = 0.01;
  /// Stop once max f − min f over the simplex falls below f_tolerance and
  /// every vertex lies within x_tolerance of the best one (max-norm). The
  /// second test keeps ties between distant vertices from ending the search.
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-8;
  std::size_t max_evals = 2000;
  /// Optional box; candidates are clamped coordinate-wise before evaluation.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct NelderMeadStep {
  std::size_t eval = 0;
  std::vector<double> x;
  double f = 0.0;
  double best = 0.0;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t evals = 0;
  bool converged = false;
  std::vector<NelderMeadStep> trace;  // one entry per evaluation
};

inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  auto check_bounds = [&](const std::vector<double>& b, const char* what) {
    if (!b.empty() && b.size() != n) {
      throw DomainError(std::string(what) + " bound has the wrong dimension");
    }
  };
  check_bounds(opt.lower, "lower");
  check_bounds(opt.upper, "upper");
  auto clamp = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!opt.lower.empty()) x[i] = std::max(x[i], opt.lower[i]);
      if (!opt.upper.empty()) x[i] = std::min(x[i], opt.upper[i]);
    }
  };

  NelderMeadResult res;
  double best = std::numeric_limits<double>::infinity();
  auto eval = [&](std::vector<double>& x) {
    clamp(x);
    double v = f(x);
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    ++res.evals;
    best = std::min(best, v);
    res.trace.push_back({res.evals, x, v, best});
    return v;
  };

  clamp(x0);
  const double f0 = eval(x0);
  if (!std::isfinite(f0)) throw NumericError("objective is not finite at the starting point");
  if (n == 0) {
    res.x = x0;
    res.f = f0;
    res.converged = true;
    return res;
  }

  std::vector<std::vector<double>> pts{x0};
  std::vector<double> fv{f0};
  for (std::size_t i = 0; i < n && res.evals < opt.max_evals; ++i) {
    auto x = x0;
    x[i] += std::max(opt.relative_step * std::abs(x0[i]), opt.absolute_step);
    if (!opt.upper.empty() && x[i] > opt.upper[i]) {
      x[i] = x0[i] - std::max(opt.relative_step * std::abs(x0[i]), opt.absolute_step);
    }
    fv.push_back(eval(x));
    pts.push_back(std::move(x));
  }

  std::vector<std::size_t> idx(pts.size());
  auto centroid_except_worst = [&]() {
    std::vector<double> c(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) c[i] += pts[idx[k]][i];
    }
    for (auto& v : c) v /= static_cast<double>(n);
    return c;
  };
  auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double coef) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + coef * (c[i] - w[i]);
    return x;
  };

  while (pts.size() == n + 1) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo = idx.front(), hi = idx.back(), second = idx[n - 1];
    double spread_x = 0.0;
    for (const auto& p : pts) {
      for (std::size_t i = 0; i < n; ++i) spread_x = std::max(spread_x, std::abs(p[i] - pts[lo][i]));
    }
    if (fv[hi] - fv[lo] < opt.f_tolerance && spread_x <= opt.x_tolerance) {
      res.converged = true;
      break;
    }
    if (res.evals >= opt.max_evals) break;

    const auto c = centroid_except_worst();
    auto xr = along(c, pts[hi], opt.reflection);
    const double fr = eval(xr);
    if (fr < fv[lo]) {
      if (res.evals >= opt.max_evals) {
        pts[hi] = xr, fv[hi] = fr;
        continue;
      }
      auto xe = along(c, pts[hi], opt.reflection * opt.expansion);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[hi] = std::move(xe), fv[hi] = fe;
      } else {
        pts[hi] = std::move(xr), fv[hi] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[hi] = std::move(xr), fv[hi] = fr;
      continue;
    }
    if (res.evals >= opt.max_evals) continue;
    // Contraction: outside if the reflected point beats the worst, else inside.
    const bool outside = fr < fv[hi];
    auto xc = outside ? along(c, pts[hi], opt.reflection * opt.contraction)
                      : along(c, pts[hi], -opt.contraction);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[hi])) {
      pts[hi] = std::move(xc), fv[hi] = fc;
      continue;
    }
    for (std::size_t k = 1; k <= n && res.evals < opt.max_evals; ++k) {
      auto& x = pts[idx[k]];
      for (std::size_t i = 0; i < n; ++i) x[i] = pts[lo][i] + opt.shrink * (x[i] - pts[lo][i]);
      fv[idx[k]] = eval(x);
    }
  }

  const auto best_it = std::min_element(fv.begin(), fv.end());
  res.x = pts[static_cast<std::size_t>(best_it - fv.begin())];
  res.f = *best_it;
  return res;
}

}  // namespace msim
