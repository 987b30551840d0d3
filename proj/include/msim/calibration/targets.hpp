#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "msim/core/error.hpp"
#include "msim/engine/io.hpp"

namespace msim {

struct TargetEntry {
  std::string key;
  double value = 0.0;
  double weight = 1.0;
};

/// Keyed target series plus scalar targets. Predictions are laid out as all
/// series entries in order, followed by all scalars in order.
struct TargetTable {
  std::vector<TargetEntry> series;
  std::vector<TargetEntry> scalars;

  std::size_t size() const noexcept { return series.size() + scalars.size(); }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(size());
    for (const auto& e : series) v.push_back(e.value);
    for (const auto& e : scalars) v.push_back(e.value);
    return v;
  }

  const TargetEntry& scalar(std::string_view name) const {
    for (const auto& e : scalars) {
      if (e.key == name) return e;
    }
    throw DomainError("no scalar target '" + std::string(name) + "'");
  }

  void validate() const {
    auto check = [](const TargetEntry& e) {
      if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
        throw DomainError("target '" + e.key + "' has a negative or non-finite weight");
      }
      if (!std::isfinite(e.value)) throw DomainError("target '" + e.key + "' is not finite");
    };
    for (const auto& e : series) check(e);
    for (const auto& e : scalars) check(e);
  }
};

/// Σ w_k (log ŷ_k − log y_k)² over series and scalar targets alike.
inline double objective_wlsq_log(const TargetTable& y, const std::vector<double>& yhat) {
  if (yhat.size() != y.size()) {
    throw DomainError("prediction has " + std::to_string(yhat.size()) + " entries, targets have " +
                      std::to_string(y.size()));
  }
  double total = 0.0;
  std::size_t i = 0;
  auto term = [&](const TargetEntry& e) {
    const double pred = yhat[i++];
    if (!(e.value > 0.0)) throw NumericError("target '" + e.key + "' is not positive");
    if (!(pred > 0.0)) {
      throw NumericError("prediction for '" + e.key + "' is not positive (" + format_double(pred) +
                         ")");
    }
    const double gap = std::log(pred) - std::log(e.value);
    total += e.weight * gap * gap;
  };
  for (const auto& e : y.series) term(e);
  for (const auto& e : y.scalars) term(e);
  return total;
}

/// CSV with header key,value,weight. Keys starting with '*' are scalar
/// targets (the '*' is stripped).
inline TargetTable read_targets_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty target table");
  auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"key", "value", "weight"}) {
    throw ConfigError("target table header must be key,value,weight");
  }
  TargetTable t;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 3) {
      throw ConfigError("target table line " + std::to_string(lineno) + ": expected 3 fields");
    }
    TargetEntry e;
    e.key = cells[0];
    try {
      e.value = parse_double(cells[1]);
      e.weight = parse_double(cells[2]);
    } catch (const DomainError& err) {
      throw ConfigError("target table line " + std::to_string(lineno) + ": " + err.what());
    }
    if (!e.key.empty() && e.key[0] == '*') {
      e.key.erase(0, 1);
      t.scalars.push_back(e);
    } else {
      t.series.push_back(e);
    }
  }
  t.validate();
  return t;
}

inline TargetTable read_targets_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open target table '" + path + "'");
  return read_targets_csv(in);
}

}  // namespace msim
