#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msim/core/error.hpp"

namespace msim {

using IndividualId = std::uint64_t;
using TimeStep = std::int64_t;

/// Value space of a status variable. Storage is always a 64-bit real; the
/// kind is enforced by Population::validate().
enum class ValueKind { real, integer, binary };

struct VariableSpec {
  std::string name;
  ValueKind kind = ValueKind::real;
};

/// Status variables, parameter names and the optional "alive" indicator that
/// marks logically removed rows.
class SimulationDomain {
 public:
  SimulationDomain(std::vector<VariableSpec> variables,
                   std::vector<std::string> parameter_names,
                   std::optional<std::string> alive_variable = std::nullopt)
      : variables_(std::move(variables)),
        parameter_names_(std::move(parameter_names)) {
    for (std::size_t j = 0; j < variables_.size(); ++j) {
      if (variables_[j].name.empty()) {
        throw DomainError("variable name must not be empty");
      }
      if (!column_index_.emplace(variables_[j].name, j).second) {
        throw DomainError("duplicate variable '" + variables_[j].name + "'");
      }
    }
    for (std::size_t k = 0; k < parameter_names_.size(); ++k) {
      if (!parameter_index_.emplace(parameter_names_[k], k).second) {
        throw DomainError("duplicate parameter '" + parameter_names_[k] + "'");
      }
    }
    if (alive_variable) {
      alive_column_ = column(*alive_variable);
      if (variables_[*alive_column_].kind != ValueKind::binary) {
        throw DomainError("alive variable '" + *alive_variable +
                          "' must be binary");
      }
    }
  }

  /// Binary indicator columns "<base>_<level>", one per level.
  static std::vector<VariableSpec> categorical(
      const std::string& base, const std::vector<std::string>& levels) {
    std::vector<VariableSpec> out;
    out.reserve(levels.size());
    for (const auto& level : levels) {
      out.push_back({base + "_" + level, ValueKind::binary});
    }
    return out;
  }

  std::size_t variable_count() const noexcept { return variables_.size(); }
  const VariableSpec& variable(std::size_t j) const { return variables_.at(j); }
  const std::vector<VariableSpec>& variables() const noexcept {
    return variables_;
  }

  std::optional<std::size_t> find_column(std::string_view name) const {
    auto it = column_index_.find(std::string(name));
    if (it == column_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t column(std::string_view name) const {
    if (auto j = find_column(name)) return *j;
    throw DomainError("undeclared variable '" + std::string(name) + "'");
  }

  std::size_t parameter_count() const noexcept {
    return parameter_names_.size();
  }
  const std::vector<std::string>& parameter_names() const noexcept {
    return parameter_names_;
  }

  std::optional<std::size_t> find_parameter(std::string_view name) const {
    auto it = parameter_index_.find(std::string(name));
    if (it == parameter_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t parameter(std::string_view name) const {
    if (auto k = find_parameter(name)) return *k;
    throw DomainError("undeclared parameter '" + std::string(name) + "'");
  }

  std::optional<std::size_t> alive_column() const noexcept {
    return alive_column_;
  }

  bool operator==(const SimulationDomain& other) const {
    if (variables_.size() != other.variables_.size()) return false;
    for (std::size_t j = 0; j < variables_.size(); ++j) {
      if (variables_[j].name != other.variables_[j].name ||
          variables_[j].kind != other.variables_[j].kind) {
        return false;
      }
    }
    return parameter_names_ == other.parameter_names_ &&
           alive_column_ == other.alive_column_;
  }

 private:
  std::vector<VariableSpec> variables_;
  std::vector<std::string> parameter_names_;
  std::unordered_map<std::string, std::size_t> column_index_;
  std::unordered_map<std::string, std::size_t> parameter_index_;
  std::optional<std::size_t> alive_column_;
};

using DomainPtr = std::shared_ptr<const SimulationDomain>;

inline DomainPtr make_domain(std::vector<VariableSpec> variables,
                             std::vector<std::string> parameter_names,
                             std::optional<std::string> alive = std::nullopt) {
  return std::make_shared<const SimulationDomain>(
      std::move(variables), std::move(parameter_names), std::move(alive));
}

}  // namespace msim
