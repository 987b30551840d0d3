#pragma once

#include <map>
#include <set>
#include <variant>

#include "msim/engine/distributions.hpp"
#include "msim/sampler/design.hpp"

namespace msim {

/// Logistic missingness model: P(missing) = invlogit(b0 + Σ b_k x_k).
struct LogisticMissingness {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;  // column -> coefficient
};

/// MCAR: constant probability. MAR: logistic in always-observed columns.
/// MNAR: logistic that may use the targeted column's own (true) value.
struct MissingnessMechanism {
  enum class Kind { mcar, mar, mnar };
  enum class Scope { cells, row };

  Kind kind = Kind::mcar;
  Scope scope = Scope::cells;
  double probability = 0.0;  // MCAR
  LogisticMissingness model;  // MAR / MNAR
  StreamTag tag{"missingness"};
  TimeStep t = 0;

  static MissingnessMechanism mcar(double p, Scope scope = Scope::cells) {
    MissingnessMechanism m;
    m.probability = p;
    m.scope = scope;
    return m;
  }
  static MissingnessMechanism mar(LogisticMissingness model, Scope scope = Scope::cells) {
    MissingnessMechanism m;
    m.kind = Kind::mar;
    m.model = std::move(model);
    m.scope = scope;
    return m;
  }
  static MissingnessMechanism mnar(LogisticMissingness model, Scope scope = Scope::cells) {
    MissingnessMechanism m;
    m.kind = Kind::mnar;
    m.model = std::move(model);
    m.scope = scope;
    return m;
  }
};

/// Masks cells of `columns` (or whole targeted row segments, for row scope).
/// Cell (r, j) is masked when u(id, t, tag, j) < p; with row scope one draw
/// u(id, t, tag, 0) decides for every targeted column of the row.
inline Sample apply_missingness(Sample s, const MissingnessMechanism& m,
                                const std::vector<std::string>& columns,
                                const LatentDraws& draws) {
  const auto& d = s.domain();
  std::vector<std::size_t> targets;
  for (const auto& c : columns) targets.push_back(d.column(c));
  std::set<std::size_t> target_set(targets.begin(), targets.end());

  std::vector<std::pair<std::size_t, double>> predictors;
  if (m.kind != MissingnessMechanism::Kind::mcar) {
    for (const auto& [name, b] : m.model.coefficients) {
      const std::size_t j = d.column(name);
      if (m.kind == MissingnessMechanism::Kind::mar && target_set.count(j)) {
        throw DomainError("MAR predictor '" + name + "' is itself masked by this mechanism");
      }
      predictors.push_back({j, b});
    }
  } else if (!(m.probability >= 0.0 && m.probability <= 1.0)) {
    throw DomainError("MCAR probability outside [0,1]");
  }

  auto prob = [&](std::size_t r) {
    if (m.kind == MissingnessMechanism::Kind::mcar) return m.probability;
    double eta = m.model.intercept;
    for (auto [j, b] : predictors) {
      double x;
      if (m.kind == MissingnessMechanism::Kind::mar) {
        auto v = s.get(r, j);
        if (!v) {
          throw DomainError("MAR predictor '" + d.variable(j).name + "' is missing for id " +
                            std::to_string(s.id(r)));
        }
        x = *v;
      } else {
        x = s.unmasked_value(r, j);
      }
      eta += b * x;
    }
    return inv_logit(eta);
  };

  // Probabilities are computed before any masking so the order of targeted
  // columns does not matter.
  std::vector<double> p(s.size());
  for (std::size_t r = 0; r < s.size(); ++r) p[r] = prob(r);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const IndividualId id = s.id(r);
    if (m.scope == MissingnessMechanism::Scope::row) {
      if (draws.uniform(id, m.t, m.tag, 0) < p[r]) {
        for (auto j : targets) s.mask(r, j);
      }
      continue;
    }
    for (auto j : targets) {
      if (draws.uniform(id, m.t, m.tag, static_cast<std::uint32_t>(j)) < p[r]) s.mask(r, j);
    }
  }
  return s;
}

namespace error_model {
struct None {};
struct AdditiveNormal {
  double sd;
};
struct Rounding {
  double step;
};
}  // namespace error_model

using ErrorModel = std::variant<error_model::None, error_model::AdditiveNormal, error_model::Rounding>;

/// Applies a measurement error function to the observed cells of one column.
/// Normal noise for individual id uses u(id, 0, "measurement-error:<column>").
inline Sample apply_error(Sample s, const std::string& column, const ErrorModel& e,
                          const LatentDraws& draws) {
  const std::size_t j = s.domain().column(column);
  if (std::holds_alternative<error_model::None>(e)) return s;
  const StreamTag tag("measurement-error:" + column);
  auto col = s.mutable_column(j);
  for (std::size_t r = 0; r < s.size(); ++r) {
    if (!s.observed(r, j)) continue;
    if (auto* n = std::get_if<error_model::AdditiveNormal>(&e)) {
      col[r] += draw_transform(draws.uniform(s.id(r), 0, tag, 0), dist::Normal{0.0, n->sd});
    } else if (auto* q = std::get_if<error_model::Rounding>(&e)) {
      if (!(q->step > 0.0)) throw NumericError("rounding step must be positive");
      col[r] = std::round(col[r] / q->step) * q->step;
    }
  }
  return s;
}

}  // namespace msim
