#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msim/core/population.hpp"

namespace msim {

/// Named parameter vector θ. Always holds exactly the domain's parameters,
/// stored in declaration order so events can bind indices once.
class ParameterVector {
 public:
  ParameterVector() = default;

  ParameterVector(DomainPtr domain, const std::map<std::string, double>& values)
      : domain_(std::move(domain)) {
    values_.assign(domain_->parameter_count(), 0.0);
    std::vector<bool> seen(values_.size(), false);
    for (const auto& [name, v] : values) {
      auto k = domain_->find_parameter(name);
      if (!k) throw DomainError("unknown parameter '" + name + "'");
      values_[*k] = v;
      seen[*k] = true;
    }
    for (std::size_t k = 0; k < seen.size(); ++k) {
      if (!seen[k]) {
        throw DomainError("missing parameter '" +
                          domain_->parameter_names()[k] + "'");
      }
    }
  }

  ParameterVector(DomainPtr domain, std::vector<double> values)
      : domain_(std::move(domain)), values_(std::move(values)) {
    if (values_.size() != domain_->parameter_count()) {
      throw DomainError("parameter vector has " +
                        std::to_string(values_.size()) + " entries, domain declares " +
                        std::to_string(domain_->parameter_count()));
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double at(std::string_view name) const {
    return values_[domain_->parameter(name)];
  }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::string>& names() const {
    return domain_->parameter_names();
  }
  const DomainPtr& shared_domain() const noexcept { return domain_; }

  /// Copy with one entry replaced.
  ParameterVector with(std::string_view name, double value) const {
    ParameterVector out = *this;
    out.values_[domain_->parameter(name)] = value;
    return out;
  }

  std::map<std::string, double> to_map() const {
    std::map<std::string, double> out;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      out.emplace(domain_->parameter_names()[k], values_[k]);
    }
    return out;
  }

  friend bool operator==(const ParameterVector& a, const ParameterVector& b) {
    return a.values_ == b.values_ &&
           a.names() == b.names();
  }

 private:
  DomainPtr domain_;
  std::vector<double> values_;
};

/// Population plus parameter configuration.
struct State {
  Population population;
  ParameterVector theta;

  friend bool operator==(const State& a, const State& b) {
    return a.population == b.population && a.theta == b.theta;
  }
};

/// Replaces θ, leaving the population untouched. The new vector must
/// describe the same parameter set.
inline State configure(const State& state, const ParameterVector& theta_new) {
  const auto& expected = state.population.domain().parameter_names();
  if (theta_new.names() != expected) {
    for (const auto& name : theta_new.names()) {
      if (!state.population.domain().find_parameter(name)) {
        throw DomainError("unknown parameter '" + name + "'");
      }
    }
    throw DomainError("parameter set does not match the domain");
  }
  return State{state.population, theta_new};
}

/// Overload taking a name->value map; every domain parameter is required.
inline State configure(const State& state,
                       const std::map<std::string, double>& values) {
  return configure(state,
                   ParameterVector(state.population.shared_domain(), values));
}

}  // namespace msim
