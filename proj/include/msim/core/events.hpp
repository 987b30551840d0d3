#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "msim/core/latent_draws.hpp"
#include "msim/core/state.hpp"

namespace msim {

/// Read-only view of one row.
class ConstRow {
 public:
  ConstRow(const Population& pop, std::size_t row) : pop_(&pop), row_(row) {}

  double operator[](std::size_t col) const { return pop_->value(row_, col); }
  double get(std::string_view name) const { return pop_->value(row_, name); }
  IndividualId id() const { return pop_->id(row_); }
  std::size_t index() const noexcept { return row_; }
  const SimulationDomain& domain() const { return pop_->domain(); }

 private:
  const Population* pop_;
  std::size_t row_;
};

using RowPredicate = std::function<bool(const ConstRow&)>;

/// Mutable view of one row handed to a manipulation mechanism. Writes are
/// checked against the event's declared write set, must be finite, and may
/// not modify a dead row unless the event declares it may.
class Row {
 public:
  struct Guard {
    const std::string* event = nullptr;
    const std::vector<char>* writable = nullptr;
    bool touches_dead = false;
  };

  Row(double* const* columns, const SimulationDomain& domain, std::size_t row,
      IndividualId id, TimeStep t, const Guard& guard)
      : columns_(columns), domain_(&domain), row_(row), id_(id), t_(t),
        guard_(&guard) {
    if (auto a = domain.alive_column()) {
      dead_at_entry_ = columns_[*a][row_] == 0.0;
    }
  }

  double operator[](std::size_t col) const { return columns_[col][row_]; }
  double get(std::string_view name) const {
    return columns_[domain_->column(name)][row_];
  }

  void set(std::size_t col, double value) {
    if (!(*guard_->writable)[col]) {
      fail("wrote undeclared variable '" + domain_->variable(col).name + "'");
    }
    if (!std::isfinite(value)) {
      fail("produced non-finite value for '" + domain_->variable(col).name +
           "'");
    }
    double& cell = columns_[col][row_];
    if (dead_at_entry_ && !guard_->touches_dead && cell != value) {
      fail("modified '" + domain_->variable(col).name + "' of a dead row");
    }
    cell = value;
  }

  void set(std::string_view name, double value) {
    auto col = domain_->find_column(name);
    if (!col) fail("wrote undeclared variable '" + std::string(name) + "'");
    set(*col, value);
  }

  IndividualId id() const noexcept { return id_; }
  TimeStep time() const noexcept { return t_; }
  bool dead_at_entry() const noexcept { return dead_at_entry_; }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw EventError("event '" + *guard_->event + "' " + what + " (id " +
                         std::to_string(id_) + ", t " + std::to_string(t_) + ")",
                     *guard_->event, t_, id_);
  }

  double* const* columns_;
  const SimulationDomain* domain_;
  std::size_t row_;
  IndividualId id_;
  TimeStep t_;
  const Guard* guard_;
  bool dead_at_entry_ = false;
};

using Mechanism =
    std::function<void(Row&, const ParameterVector&, const RowDraws&)>;

/// Rows [begin, end) of a chunk, as handed to an event kernel.
struct RowRange {
  double* const* columns;
  const SimulationDomain* domain;
  const IndividualId* ids;
  std::size_t begin, end;
  TimeStep t;
  const LatentDraws* draws;
  StreamTag tag;
  const Row::Guard* guard;
};

/// Loop form of a mechanism over a row range. It must leave every row as
/// the mechanism applied row by row would.
using Kernel = std::function<void(const RowRange&, const ParameterVector&)>;

/// Pure per-row rewrite applied once per time step.
struct ManipulationEvent {
  std::string name;
  std::string description;
  std::vector<std::string> parameters;  // parameters the mechanism reads
  std::vector<std::string> writes;      // variables the mechanism may assign
  Mechanism mechanism;
  bool touches_dead = false;
  Kernel kernel;  // optional; see row_kernel()

  StreamTag tag() const { return StreamTag(name); }
};

namespace detail {

[[noreturn]] inline void rethrow_as_event_error(const std::string& event, IndividualId id,
                                                TimeStep t) {
  try {
    throw;
  } catch (const EventError&) {
    throw;
  } catch (const std::exception& ex) {
    throw EventError("event '" + event + "' failed (id " + std::to_string(id) + ", t " +
                         std::to_string(t) + "): " + ex.what(),
                     event, t, id);
  }
}

}  // namespace detail

/// Kernel that runs `body` (same signature as a Mechanism) on each row with
/// the call inlined into the loop.
template <class F>
Kernel row_kernel(F body) {
  return [body](const RowRange& rr, const ParameterVector& theta) {
    std::size_t row = rr.begin;
    try {
      for (; row < rr.end; ++row) {
        Row view(rr.columns, *rr.domain, row, rr.ids[row], rr.t, *rr.guard);
        RowDraws psi(*rr.draws, rr.ids[row], rr.t, rr.tag);
        body(view, theta, psi);
      }
    } catch (...) {
      detail::rethrow_as_event_error(*rr.guard->event, rr.ids[row], rr.t);
    }
  };
}

/// Event built from `prepare(theta, t)`, which returns the row body
/// `(Row&, const RowDraws&)`. The kernel prepares once per range, so
/// parameter lookups and per-step tables stay out of the row loop.
template <class P>
ManipulationEvent make_prepared_manipulation(std::string name, std::string description,
                                             std::vector<std::string> parameters,
                                             std::vector<std::string> writes, P prepare) {
  Mechanism mechanism = [prepare](Row& row, const ParameterVector& theta, const RowDraws& psi) {
    prepare(theta, psi.time())(row, psi);
  };
  Kernel kernel = [prepare](const RowRange& rr, const ParameterVector& theta) {
    std::size_t row = rr.begin;
    try {
      auto body = prepare(theta, rr.t);
      for (; row < rr.end; ++row) {
        Row view(rr.columns, *rr.domain, row, rr.ids[row], rr.t, *rr.guard);
        RowDraws psi(*rr.draws, rr.ids[row], rr.t, rr.tag);
        body(view, psi);
      }
    } catch (...) {
      detail::rethrow_as_event_error(*rr.guard->event, rr.ids[row], rr.t);
    }
  };
  return {std::move(name), std::move(description), std::move(parameters), std::move(writes),
          std::move(mechanism), false, std::move(kernel)};
}

/// Event whose mechanism and kernel share one body.
template <class F>
ManipulationEvent make_manipulation(std::string name, std::string description,
                                    std::vector<std::string> parameters,
                                    std::vector<std::string> writes, F body) {
  return {std::move(name), std::move(description), std::move(parameters), std::move(writes),
          Mechanism(body), false, row_kernel(body)};
}

/// Draws available to an accumulation generator: one stream per new row,
/// keyed by the id that row will receive.
class AccumulationDraws {
 public:
  AccumulationDraws(const LatentDraws& draws, IndividualId first_id,
                    TimeStep t, StreamTag tag)
      : draws_(&draws), first_id_(first_id), t_(t), tag_(tag) {}

  IndividualId id(std::size_t k) const noexcept { return first_id_ + k; }
  double uniform(std::size_t k, std::uint32_t index = 0) const {
    return draws_->uniform(first_id_ + k, t_, tag_, index);
  }
  TimeStep time() const noexcept { return t_; }

 private:
  const LatentDraws* draws_;
  IndividualId first_id_;
  TimeStep t_;
  StreamTag tag_;
};

using RowBlock = std::vector<std::vector<double>>;

/// Row appender: count() picks k, generate() produces exactly k rows.
struct AccumulationEvent {
  std::string name;
  std::string description;
  std::function<std::size_t(const ParameterVector&, const RowDraws&)> count;
  std::function<RowBlock(const ParameterVector&, const AccumulationDraws&,
                         std::size_t)>
      generate;

  StreamTag tag() const { return StreamTag(name); }
};

struct EventSet {
  std::vector<ManipulationEvent> manipulations;
  std::vector<AccumulationEvent> accumulations;
};

/// A manipulation event with names resolved against a domain.
struct BoundManipulation {
  const ManipulationEvent* event;
  std::vector<char> writable;
  StreamTag tag;
  Row::Guard guard;

  BoundManipulation(const ManipulationEvent& e, const SimulationDomain& domain)
      : event(&e), writable(domain.variable_count(), 0), tag(e.tag()) {
    if (!e.mechanism) {
      throw DomainError("event '" + e.name + "' has no mechanism");
    }
    for (const auto& w : e.writes) {
      auto col = domain.find_column(w);
      if (!col) {
        throw DomainError("event '" + e.name + "' writes undeclared variable '" +
                          w + "'");
      }
      writable[*col] = 1;
    }
    for (const auto& p : e.parameters) {
      if (!domain.find_parameter(p)) {
        throw DomainError("event '" + e.name + "' reads undeclared parameter '" +
                          p + "'");
      }
    }
    guard = Row::Guard{&event->name, &writable, e.touches_dead};
  }

  BoundManipulation(const BoundManipulation& o)
      : event(o.event), writable(o.writable), tag(o.tag),
        guard{&event->name, &writable, o.guard.touches_dead} {}
  BoundManipulation& operator=(const BoundManipulation&) = delete;

  void apply(double* const* columns, const SimulationDomain& domain,
             std::size_t row, IndividualId id, TimeStep t,
             const ParameterVector& theta, const LatentDraws& draws) const {
    Row view(columns, domain, row, id, t, guard);
    RowDraws psi(draws, id, t, tag);
    try {
      event->mechanism(view, theta, psi);
    } catch (...) {
      detail::rethrow_as_event_error(event->name, id, t);
    }
  }

  void apply_range(const RowRange& range, const ParameterVector& theta) const {
    if (event->kernel) {
      event->kernel(range, theta);
      return;
    }
    for (std::size_t row = range.begin; row < range.end; ++row) {
      apply(range.columns, *range.domain, row, range.ids[row], range.t, theta, *range.draws);
    }
  }
};

inline std::vector<BoundManipulation> bind_all(
    const std::vector<ManipulationEvent>& events,
    const SimulationDomain& domain) {
  std::vector<BoundManipulation> out;
  out.reserve(events.size());
  for (const auto& e : events) out.emplace_back(e, domain);
  return out;
}

/// Applies one manipulation event to every row; n and ids are unchanged.
inline Population apply_manipulation(const ManipulationEvent& event,
                                     const Population& pop,
                                     const ParameterVector& theta,
                                     const LatentDraws& draws, TimeStep t) {
  BoundManipulation bound(event, pop.domain());
  Population out = pop;
  out.detach();
  std::vector<double*> cols(out.width());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = out.data(j);
  for (std::size_t r = 0; r < out.size(); ++r) {
    bound.apply(cols.data(), out.domain(), r, out.id(r), t, theta, draws);
  }
  return out;
}

/// Appends the rows generated by one accumulation event to `pop` in place.
/// Returns the number of rows added.
inline std::size_t accumulate_in_place(const AccumulationEvent& event,
                                       Population& pop,
                                       const ParameterVector& theta,
                                       const LatentDraws& draws, TimeStep t) {
  if (!event.count || !event.generate) {
    throw DomainError("accumulation event '" + event.name +
                      "' lacks a count or generator");
  }
  const StreamTag tag = event.tag();
  const std::size_t k = event.count(theta, RowDraws(draws, kCoordinatorId, t, tag));
  if (k == 0) return 0;
  const IndividualId first = pop.next_id();
  RowBlock rows = event.generate(theta, AccumulationDraws(draws, first, t, tag), k);
  if (rows.size() != k) {
    throw EventError("accumulation event '" + event.name + "' generated " +
                         std::to_string(rows.size()) + " rows, expected " +
                         std::to_string(k) + " (t " + std::to_string(t) + ")",
                     event.name, t, first);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const auto& row = rows[i];
    if (row.size() != pop.width()) {
      throw EventError("accumulation event '" + event.name +
                           "' generated a row of width " +
                           std::to_string(row.size()),
                       event.name, t, first + i);
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!std::isfinite(row[j])) {
        throw EventError("accumulation event '" + event.name +
                             "' generated non-finite '" +
                             pop.domain().variable(j).name + "'",
                         event.name, t, first + i);
      }
    }
    pop.append_row(first + i, row);
  }
  return k;
}

/// d_a for a single event: original rows first, new rows after with fresh ids.
inline Population apply_accumulation(const AccumulationEvent& event,
                                     const Population& pop,
                                     const ParameterVector& theta,
                                     const LatentDraws& draws, TimeStep t) {
  Population out = pop;
  accumulate_in_place(event, out, theta, draws, t);
  return out;
}

}  // namespace msim
