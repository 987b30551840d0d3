#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "msim/engine/io.hpp"

namespace msim {

/// Observed data drawn from a population: one row per invitee, a per-cell
/// observed mask, and the design metadata. Masked cells keep their value
/// underneath but are only reachable through unmasked_value().
class Sample {
 public:
  /// Every invitee observed, every invitee participating.
  Sample(Population data) : data_(std::move(data)) {
    observed_.assign(data_.width(), std::vector<char>(data_.size(), 1));
    participated_.assign(data_.size(), 1);
  }

  const Population& data_unchecked() const noexcept { return data_; }
  const SimulationDomain& domain() const { return data_.domain(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t width() const noexcept { return data_.width(); }
  IndividualId id(std::size_t r) const { return data_.id(r); }

  bool observed(std::size_t r, std::size_t j) const { return observed_[j][r] != 0; }
  std::optional<double> get(std::size_t r, std::size_t j) const {
    if (!observed(r, j)) return std::nullopt;
    return data_.value(r, j);
  }
  std::optional<double> get(std::size_t r, std::string_view name) const {
    return get(r, data_.domain().column(name));
  }
  /// Debug access that ignores the mask.
  double unmasked_value(std::size_t r, std::size_t j) const { return data_.value(r, j); }

  bool participated(std::size_t r) const { return participated_[r] != 0; }
  std::size_t participant_count() const {
    std::size_t c = 0;
    for (char p : participated_) c += p != 0;
    return c;
  }

  void mask(std::size_t r, std::size_t j) { observed_[j][r] = 0; }
  void mask_row(std::size_t r) {
    for (auto& col : observed_) col[r] = 0;
  }
  void set_participated(std::size_t r, bool p) { participated_[r] = p ? 1 : 0; }
  std::span<double> mutable_column(std::size_t j) { return data_.mutable_column(j); }

  std::vector<std::vector<bool>> mask_planes() const {
    std::vector<std::vector<bool>> out;
    for (const auto& col : observed_) out.emplace_back(col.begin(), col.end());
    return out;
  }

  double observed_fraction(std::size_t j) const {
    if (size() == 0) return 1.0;
    std::size_t c = 0;
    for (char o : observed_[j]) c += o != 0;
    return static_cast<double>(c) / static_cast<double>(size());
  }

 private:
  Population data_;
  std::vector<std::vector<char>> observed_;  // [column][row]
  std::vector<char> participated_;
};

/// Rows of `pop` with the given ids (in ascending id order), as a sample
/// restricted to `columns` (all columns when empty).
inline Sample make_sample(const Population& pop, std::vector<IndividualId> ids,
                          const std::vector<std::string>& columns = {}) {
  std::sort(ids.begin(), ids.end());
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (auto id : ids) {
    auto r = pop.find_row(id);
    if (!r) throw DomainError("invitee id " + std::to_string(id) + " not in population");
    rows.push_back(*r);
  }
  if (columns.empty()) return Sample(pop.select_rows(rows));

  std::vector<VariableSpec> vars;
  std::vector<std::size_t> src;
  for (const auto& c : columns) {
    src.push_back(pop.domain().column(c));
    vars.push_back(pop.domain().variable(src.back()));
  }
  auto d = make_domain(vars, {});
  Population out(d);
  out.reserve(rows.size());
  std::vector<double> row(src.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < src.size(); ++j) row[j] = pop.value(rows[k], src[j]);
    out.append_row(pop.id(rows[k]), row);
  }
  return Sample(std::move(out));
}

/// CSV with id column and "NA" for masked cells.
inline void write_sample_csv(const Sample& s, std::ostream& os) {
  const auto& vars = s.domain().variables();
  os << "id";
  for (const auto& v : vars) os << ',' << v.name;
  os << '\n';
  for (std::size_t r = 0; r < s.size(); ++r) {
    os << s.id(r);
    for (std::size_t j = 0; j < vars.size(); ++j) {
      os << ',';
      if (auto v = s.get(r, j)) {
        os << format_double(*v);
      } else {
        os << "NA";
      }
    }
    os << '\n';
  }
}

/// Design sidecar: id, invited, participated.
inline void write_design_csv(const Sample& s, std::ostream& os) {
  os << "id,invited,participated\n";
  for (std::size_t r = 0; r < s.size(); ++r) {
    os << s.id(r) << ",1," << (s.participated(r) ? 1 : 0) << '\n';
  }
}

/// PSIM1 export with one observed-bit plane per column. Masked cells are
/// written as NaN so the underlying value does not leak.
inline void write_sample_psim(const Sample& s, std::ostream& os) {
  Population copy = s.data_unchecked();
  for (std::size_t j = 0; j < copy.width(); ++j) {
    auto col = copy.mutable_column(j);
    for (std::size_t r = 0; r < copy.size(); ++r) {
      if (!s.observed(r, j)) col[r] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const auto planes = s.mask_planes();
  write_psim(copy, os, &planes);
}

}  // namespace msim
