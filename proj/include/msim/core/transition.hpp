#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "msim/core/events.hpp"

namespace msim {

/// How manipulation events are ordered within a step.
///  - fixed: declaration order for every row and step
///  - shared: one random permutation per step, common to all rows
///  - per_individual: one random permutation per (id, step)
struct EventOrder {
  enum class Mode { fixed, shared, per_individual };

  Mode mode = Mode::shared;
  StreamTag tag{"event-order"};

  static EventOrder fixed() { return {Mode::fixed}; }
  static EventOrder shared() { return {Mode::shared}; }
  static EventOrder per_individual() { return {Mode::per_individual}; }
};

/// Fisher-Yates shuffle driven by the (id, t, tag) stream.
inline void fill_permutation(std::span<std::size_t> perm, const LatentDraws& draws,
                             IndividualId id, TimeStep t, StreamTag tag) {
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (perm.size() < 2) return;
  RowDraws psi(draws, id, t, tag);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    auto j = static_cast<std::size_t>(psi.uniform(static_cast<std::uint32_t>(i)) *
                                      static_cast<double>(i + 1));
    if (j > i) j = i;
    std::swap(perm[i], perm[j]);
  }
}

struct EventPermutations {
  EventOrder::Mode mode = EventOrder::Mode::fixed;
  std::vector<std::size_t> shared;
  std::vector<std::vector<std::size_t>> per_row;

  const std::vector<std::size_t>& for_row(std::size_t row) const {
    return mode == EventOrder::Mode::per_individual ? per_row[row] : shared;
  }
};

/// Application order of r manipulation events for every row of a step.
inline EventPermutations make_event_order(const EventOrder& order, std::size_t r,
                                          std::span<const IndividualId> ids,
                                          const LatentDraws& draws, TimeStep t) {
  EventPermutations out;
  out.mode = order.mode;
  out.shared.resize(r);
  switch (order.mode) {
    case EventOrder::Mode::fixed:
      std::iota(out.shared.begin(), out.shared.end(), std::size_t{0});
      break;
    case EventOrder::Mode::shared:
      fill_permutation(out.shared, draws, kCoordinatorId, t, order.tag);
      break;
    case EventOrder::Mode::per_individual:
      out.per_row.assign(ids.size(), std::vector<std::size_t>(r));
      for (std::size_t i = 0; i < ids.size(); ++i) {
        fill_permutation(out.per_row[i], draws, ids[i], t, order.tag);
      }
      break;
  }
  return out;
}

/// Events of a simulator with names resolved once, reusable across steps.
class BoundEvents {
 public:
  BoundEvents(const EventSet& events, const SimulationDomain& domain)
      : events_(&events), manipulations_(bind_all(events.manipulations, domain)) {}

  const EventSet& events() const noexcept { return *events_; }
  const std::vector<BoundManipulation>& manipulations() const noexcept {
    return manipulations_;
  }

 private:
  const EventSet* events_;
  std::vector<BoundManipulation> manipulations_;
};

/// Accumulation phase for one step: every accumulation event, in declaration
/// order, appends to `pop`.
inline void accumulation_phase(Population& pop, const ParameterVector& theta,
                               const LatentDraws& draws, TimeStep t,
                               const EventSet& events) {
  for (const auto& acc : events.accumulations) {
    accumulate_in_place(acc, pop, theta, draws, t);
  }
}

/// Manipulation phase over rows [begin, end) of `pop`, in place.
inline void manipulation_phase(Population& pop, std::size_t begin, std::size_t end,
                               const ParameterVector& theta,
                               const LatentDraws& draws, TimeStep t,
                               const BoundEvents& bound, const EventOrder& order) {
  const auto& ms = bound.manipulations();
  const std::size_t r = ms.size();
  if (r == 0 || begin >= end) return;
  pop.detach();
  std::vector<double*> cols(pop.width());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = pop.data(j);
  const auto ids = pop.ids();
  const auto& domain = pop.domain();

  std::vector<std::size_t> perm(r);
  if (order.mode == EventOrder::Mode::shared) {
    fill_permutation(perm, draws, kCoordinatorId, t, order.tag);
  } else {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
  }
  if (order.mode != EventOrder::Mode::per_individual) {
    // Events are row-pure, so with one order for all rows applying each event
    // to every row in turn composes exactly as row by row.
    for (std::size_t e : perm) {
      const RowRange range{cols.data(), &domain, ids.data(), begin, end,
                           t, &draws, ms[e].tag, &ms[e].guard};
      ms[e].apply_range(range, theta);
    }
    return;
  }
  for (std::size_t row = begin; row < end; ++row) {
    const IndividualId id = ids[row];
    fill_permutation(perm, draws, id, t, order.tag);
    for (std::size_t e : perm) {
      ms[e].apply(cols.data(), domain, row, id, t, theta, draws);
    }
  }
}

/// δ(S, ψ_t): accumulation first, then the manipulation events per row in
/// the order given by `order`. θ is carried through unchanged.
inline State transition(const State& state, const LatentDraws& draws, TimeStep t,
                        const EventSet& events, const EventOrder& order) {
  State next = state;
  accumulation_phase(next.population, next.theta, draws, t, events);
  BoundEvents bound(events, next.population.domain());
  manipulation_phase(next.population, 0, next.population.size(), next.theta,
                     draws, t, bound, order);
  return next;
}

}  // namespace msim
