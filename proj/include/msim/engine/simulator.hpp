#pragma once

#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "msim/core/transition.hpp"
#include "msim/engine/partition.hpp"

namespace msim {

/// Named per-step reduction over the population. Count trackers sum a 0/1
/// predicate exactly; sum trackers use pairwise summation per chunk.
struct Tracker {
  enum class Kind { count, sum };
  using Predicate = std::function<bool(const ConstRow&, TimeStep)>;

  std::string name;
  Kind kind = Kind::count;
  std::function<double(const ConstRow&, TimeStep)> value;
  Predicate predicate;  // count trackers

  static Tracker count(std::string name, Predicate pred) {
    Tracker t{std::move(name), Kind::count, {}, std::move(pred)};
    t.value = [p = t.predicate](const ConstRow& r, TimeStep s) { return p(r, s) ? 1.0 : 0.0; };
    return t;
  }
  static Tracker sum(std::string name,
                     std::function<double(const ConstRow&, TimeStep)> fn) {
    return {std::move(name), Kind::sum, std::move(fn), {}};
  }
};

struct Simulator {
  EventSet events;
  EventOrder order = EventOrder::shared();
  std::uint64_t master_seed = 0;
  std::vector<Tracker> trackers;

  LatentDraws draws() const { return LatentDraws(master_seed); }
};

struct SnapshotPolicy {
  enum class Kind { none, final_only, every };
  Kind kind = Kind::none;
  TimeStep every = 0;

  static SnapshotPolicy none() { return {}; }
  static SnapshotPolicy final_only() { return {Kind::final_only, 0}; }
  static SnapshotPolicy every_k(TimeStep k) { return {Kind::every, k}; }

  bool wants(TimeStep t, TimeStep horizon) const {
    switch (kind) {
      case Kind::none: return false;
      case Kind::final_only: return t == horizon;
      case Kind::every: return every > 0 && t % every == 0;
    }
    return false;
  }
};

struct RunPlan {
  TimeStep horizon = 0;
  SnapshotPolicy snapshots;
  std::size_t partitions = 1;

  RunPlan(TimeStep horizon_ = 0, SnapshotPolicy snapshots_ = {}, std::size_t partitions_ = 1)
      : horizon(horizon_), snapshots(snapshots_), partitions(partitions_) {}
};

/// Mutable context handed to step hooks (interventions). Each chunk gets its
/// own context; `owns_new_rows` marks the chunk that receives accumulated rows.
struct StepContext {
  Population& population;
  ParameterVector& theta;
  const LatentDraws& draws;
  TimeStep t;
  bool owns_new_rows;
};

/// Callback run on every chunk after the transition of each step t in
/// [from, until]; a hook with from == 0 also runs on the start state.
struct StepHook {
  TimeStep from = 0;
  TimeStep until = std::numeric_limits<TimeStep>::max();
  std::function<void(StepContext&)> apply;
};

struct Snapshot {
  TimeStep t;
  State state;
};

struct TrackerSeries {
  std::string name;
  Tracker::Kind kind;
  std::vector<double> values;  // values[t - 1] for t = 1..T
};

struct SimulationRecord {
  State final_state;
  std::vector<Snapshot> snapshots;
  std::vector<TrackerSeries> trackers;

  const TrackerSeries& tracker(std::string_view name) const {
    for (const auto& s : trackers) {
      if (s.name == name) return s;
    }
    throw DomainError("no tracker named '" + std::string(name) + "'");
  }
};

namespace detail {

inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

struct ChunkResult {
  Population population;
  ParameterVector theta;
  std::vector<std::vector<double>> tracker_partials;  // [tracker][t-1]
  std::vector<Snapshot> snapshots;
  std::exception_ptr error;
  TimeStep failed_at = std::numeric_limits<TimeStep>::max();
};

inline void run_hooks(const std::vector<StepHook>& hooks, StepContext& ctx) {
  for (const auto& h : hooks) {
    if (ctx.t >= h.from && ctx.t <= h.until && h.apply) h.apply(ctx);
  }
}

inline void run_chunk(const Simulator& sim, const RunPlan& plan,
                      const std::vector<StepHook>& hooks, bool owns_new_rows,
                      ChunkResult& out) {
  const LatentDraws draws = sim.draws();
  Population& pop = out.population;
  ParameterVector& theta = out.theta;
  TimeStep t = 0;
  try {
    BoundEvents bound(sim.events, pop.domain());
    out.tracker_partials.assign(sim.trackers.size(),
                                std::vector<double>(static_cast<std::size_t>(plan.horizon), 0.0));
    std::vector<double> buffer;

    StepContext ctx0{pop, theta, draws, 0, owns_new_rows};
    run_hooks(hooks, ctx0);
    if (plan.snapshots.wants(0, plan.horizon)) out.snapshots.push_back({0, State{pop, theta}});

    for (t = 1; t <= plan.horizon; ++t) {
      if (owns_new_rows) accumulation_phase(pop, theta, draws, t, sim.events);
      manipulation_phase(pop, 0, pop.size(), theta, draws, t, bound, sim.order);
      StepContext ctx{pop, theta, draws, t, owns_new_rows};
      run_hooks(hooks, ctx);

      for (std::size_t k = 0; k < sim.trackers.size(); ++k) {
        const auto& tr = sim.trackers[k];
        double total = 0.0;
        if (tr.kind == Tracker::Kind::count) {
          std::int64_t c = 0;
          for (std::size_t r = 0; r < pop.size(); ++r) {
            if (tr.predicate ? tr.predicate(ConstRow(pop, r), t)
                             : tr.value(ConstRow(pop, r), t) != 0.0) {
              ++c;
            }
          }
          total = static_cast<double>(c);
        } else {
          buffer.resize(pop.size());
          for (std::size_t r = 0; r < pop.size(); ++r) {
            buffer[r] = tr.value(ConstRow(pop, r), t);
          }
          total = pairwise_sum(buffer.data(), buffer.size());
        }
        out.tracker_partials[k][static_cast<std::size_t>(t - 1)] = total;
      }
      if (plan.snapshots.wants(t, plan.horizon)) out.snapshots.push_back({t, State{pop, theta}});
    }
  } catch (...) {
    out.error = std::current_exception();
    out.failed_at = t;
  }
}

}  // namespace detail

/// Runs the simulation sequence S_0..S_T. The population is split into
/// plan.partitions chunks that advance independently on worker threads and
/// are merged at the end; because draws are keyed by individual id, the
/// result is identical for every partition count.
inline SimulationRecord run(const Simulator& sim, const State& start,
                            const RunPlan& plan,
                            const std::vector<StepHook>& hooks = {}) {
  if (plan.horizon < 0) throw DomainError("horizon must be non-negative");
  if (plan.partitions == 0) throw DomainError("partition count must be at least 1");

  auto chunks = partition(start.population, plan.partitions);
  std::vector<detail::ChunkResult> results;
  results.reserve(chunks.size());
  for (auto& c : chunks) {
    results.push_back(detail::ChunkResult{std::move(c), start.theta, {}, {}, nullptr,
                                          std::numeric_limits<TimeStep>::max()});
  }
  const std::size_t last = results.size() - 1;
  if (results.size() == 1) {
    detail::run_chunk(sim, plan, hooks, true, results[0]);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(results.size());
    for (std::size_t c = 0; c < results.size(); ++c) {
      workers.emplace_back([&, c] {
        detail::run_chunk(sim, plan, hooks, c == last, results[c]);
      });
    }
    for (auto& w : workers) w.join();
  }

  const detail::ChunkResult* failed = nullptr;
  for (const auto& r : results) {
    if (r.error && (!failed || r.failed_at < failed->failed_at)) failed = &r;
  }
  if (failed) std::rethrow_exception(failed->error);

  std::vector<Population> finals;
  finals.reserve(results.size());
  for (auto& r : results) finals.push_back(std::move(r.population));
  SimulationRecord record{State{merge(finals), results.front().theta}, {}, {}};

  const std::size_t n_snap = results.front().snapshots.size();
  for (std::size_t s = 0; s < n_snap; ++s) {
    std::vector<Population> parts;
    parts.reserve(results.size());
    for (auto& r : results) parts.push_back(std::move(r.snapshots[s].state.population));
    record.snapshots.push_back(
        Snapshot{results.front().snapshots[s].t,
                 State{merge(parts), results.front().snapshots[s].state.theta}});
  }

  for (std::size_t k = 0; k < sim.trackers.size(); ++k) {
    TrackerSeries series{sim.trackers[k].name, sim.trackers[k].kind,
                         std::vector<double>(static_cast<std::size_t>(plan.horizon), 0.0)};
    for (std::size_t i = 0; i < series.values.size(); ++i) {
      double total = 0.0;
      for (const auto& r : results) total += r.tracker_partials[k][i];
      series.values[i] = total;
    }
    record.trackers.push_back(std::move(series));
  }
  return record;
}

}  // namespace msim
