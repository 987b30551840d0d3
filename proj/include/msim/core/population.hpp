#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msim/core/domain.hpp"

namespace msim {

/// Columnar table of n individuals x m status variables plus a stable id
/// column. Columns are shared between copies and detached on first write, so
/// copying a Population (e.g. for a snapshot) costs O(m).
class Population {
 public:
  using Column = std::vector<double>;

  explicit Population(DomainPtr domain) : domain_(std::move(domain)) {
    if (!domain_) throw DomainError("population requires a domain");
    columns_.reserve(domain_->variable_count());
    for (std::size_t j = 0; j < domain_->variable_count(); ++j) {
      columns_.push_back(std::make_shared<Column>());
    }
    ids_ = std::make_shared<std::vector<IndividualId>>();
  }

  const SimulationDomain& domain() const noexcept { return *domain_; }
  const DomainPtr& shared_domain() const noexcept { return domain_; }

  std::size_t size() const noexcept { return ids_->size(); }
  bool empty() const noexcept { return ids_->empty(); }
  std::size_t width() const noexcept { return columns_.size(); }

  std::span<const IndividualId> ids() const noexcept { return *ids_; }
  IndividualId id(std::size_t row) const { return (*ids_)[row]; }

  std::span<const double> column(std::size_t j) const { return *columns_.at(j); }
  std::span<const double> column(std::string_view name) const {
    return column(domain_->column(name));
  }

  /// Writable view of column j; detaches it from any copy sharing storage.
  std::span<double> mutable_column(std::size_t j) {
    auto& col = columns_.at(j);
    if (col.use_count() > 1) col = std::make_shared<Column>(*col);
    return *col;
  }
  std::span<double> mutable_column(std::string_view name) {
    return mutable_column(domain_->column(name));
  }

  /// Detach every column; afterwards raw pointers from data() stay valid
  /// until the next structural change.
  void detach() {
    for (std::size_t j = 0; j < columns_.size(); ++j) mutable_column(j);
  }

  double* data(std::size_t j) { return mutable_column(j).data(); }

  double value(std::size_t row, std::size_t col) const {
    return (*columns_[col])[row];
  }
  double value(std::size_t row, std::string_view name) const {
    return value(row, domain_->column(name));
  }

  /// Smallest id that has never been handed out in this population's lineage.
  IndividualId next_id() const noexcept { return next_id_; }
  void reserve_ids_through(IndividualId next) {
    next_id_ = std::max(next_id_, next);
  }

  void reserve(std::size_t n) {
    detach_ids();
    ids_->reserve(n);
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      mutable_column(j);
      columns_[j]->reserve(n);
    }
  }

  /// Appends one row. The id must be >= next_id().
  void append_row(IndividualId id, std::span<const double> values) {
    if (values.size() != columns_.size()) {
      throw DomainError("row width " + std::to_string(values.size()) +
                        " does not match domain width " +
                        std::to_string(columns_.size()));
    }
    if (id < next_id_) {
      throw DomainError("id " + std::to_string(id) +
                        " is not fresh (next free id is " +
                        std::to_string(next_id_) + ")");
    }
    detach_ids();
    ids_->push_back(id);
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      mutable_column(j);
      columns_[j]->push_back(values[j]);
    }
    next_id_ = id + 1;
  }

  /// Appends a row with the next fresh id and returns that id.
  IndividualId append_row(std::span<const double> values) {
    IndividualId id = next_id_;
    append_row(id, values);
    return id;
  }

  std::vector<double> row(std::size_t r) const {
    std::vector<double> out(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) out[j] = (*columns_[j])[r];
    return out;
  }

  /// Copy of the given rows, in the given order.
  Population select_rows(std::span<const std::size_t> rows) const {
    Population out(domain_);
    out.next_id_ = next_id_;
    out.ids_->reserve(rows.size());
    for (std::size_t r : rows) out.ids_->push_back((*ids_)[r]);
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      auto& dst = *out.columns_[j];
      const auto& src = *columns_[j];
      dst.reserve(rows.size());
      for (std::size_t r : rows) dst.push_back(src[r]);
    }
    return out;
  }

  /// Contiguous slice [begin, end).
  Population slice(std::size_t begin, std::size_t end) const {
    Population out(domain_);
    out.next_id_ = next_id_;
    out.ids_->assign(ids_->begin() + static_cast<std::ptrdiff_t>(begin),
                     ids_->begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      out.columns_[j]->assign(
          columns_[j]->begin() + static_cast<std::ptrdiff_t>(begin),
          columns_[j]->begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
  }

  /// Row index of an id, assuming ids are sorted ascending (true for every
  /// population produced by the engine).
  std::optional<std::size_t> find_row(IndividualId id) const {
    auto it = std::lower_bound(ids_->begin(), ids_->end(), id);
    if (it == ids_->end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids_->begin());
  }

  bool shares_column_with(const Population& other, std::size_t j) const {
    return columns_.at(j) == other.columns_.at(j);
  }

  /// Checks uniqueness of ids, finiteness, and binary/integer value kinds.
  void validate() const {
    std::vector<IndividualId> sorted(ids_->begin(), ids_->end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw DomainError("duplicate individual id");
    }
    if (!sorted.empty() && sorted.back() >= next_id_) {
      throw DomainError("id counter behind existing ids");
    }
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const auto& spec = domain_->variable(j);
      const auto& col = *columns_[j];
      for (std::size_t r = 0; r < col.size(); ++r) {
        double v = col[r];
        if (!std::isfinite(v)) {
          throw DomainError("non-finite value in '" + spec.name + "' for id " +
                            std::to_string((*ids_)[r]));
        }
        if (spec.kind == ValueKind::binary && v != 0.0 && v != 1.0) {
          throw DomainError("binary variable '" + spec.name +
                            "' holds non-binary value for id " +
                            std::to_string((*ids_)[r]));
        }
        if (spec.kind == ValueKind::integer && v != std::trunc(v)) {
          throw DomainError("integer variable '" + spec.name +
                            "' holds fractional value for id " +
                            std::to_string((*ids_)[r]));
        }
      }
    }
  }

  /// Bitwise equality of ids and every column.
  friend bool operator==(const Population& a, const Population& b) {
    if (!(*a.domain_ == *b.domain_)) return false;
    if (*a.ids_ != *b.ids_) return false;
    for (std::size_t j = 0; j < a.columns_.size(); ++j) {
      const auto& x = *a.columns_[j];
      const auto& y = *b.columns_[j];
      for (std::size_t r = 0; r < x.size(); ++r) {
        if (std::bit_cast<std::uint64_t>(x[r]) !=
            std::bit_cast<std::uint64_t>(y[r])) {
          return false;
        }
      }
    }
    return true;
  }

 private:
  void detach_ids() {
    if (ids_.use_count() > 1) {
      ids_ = std::make_shared<std::vector<IndividualId>>(*ids_);
    }
  }

  DomainPtr domain_;
  std::vector<std::shared_ptr<Column>> columns_;
  std::shared_ptr<std::vector<IndividualId>> ids_;
  IndividualId next_id_ = 0;
};

}  // namespace msim
