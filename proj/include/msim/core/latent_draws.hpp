#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>

#include "msim/core/domain.hpp"

namespace msim {

namespace detail {

// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Identifies the consumer of randomness (an event, the sampler, the event
/// order). Distinct tags give independent streams.
class StreamTag {
 public:
  constexpr explicit StreamTag(std::string_view name) noexcept
      : value_(detail::mix64(detail::fnv1a(name))) {}
  constexpr static StreamTag from_value(std::uint64_t v) noexcept {
    StreamTag t{""};
    t.value_ = v;
    return t;
  }
  constexpr std::uint64_t value() const noexcept { return value_; }
  constexpr bool operator==(const StreamTag&) const = default;

 private:
  std::uint64_t value_;
};

/// Id used for draws that belong to no individual (shared event order,
/// accumulation counts).
inline constexpr IndividualId kCoordinatorId = ~IndividualId{0};

/// ψ as a pure function of (seed, id, t, tag, index). No generator state is
/// carried between calls, so results do not depend on evaluation order or on
/// how the population is split across workers.
class LatentDraws {
 public:
  using Override =
      std::function<double(IndividualId, TimeStep, StreamTag, std::uint32_t)>;

  constexpr explicit LatentDraws(std::uint64_t seed = 0) noexcept
      : seed_(seed), key_(detail::mix64(seed + 0x9e3779b97f4a7c15ULL)) {}

  /// Draws replaced by a caller-supplied function (tests, forced events).
  static LatentDraws forced(Override fn) {
    LatentDraws d(0);
    d.override_ = std::make_shared<const Override>(std::move(fn));
    return d;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  bool is_forced() const noexcept { return static_cast<bool>(override_); }

  std::uint64_t bits(IndividualId id, TimeStep t, StreamTag tag,
                     std::uint32_t index) const noexcept {
    return finish(row_base(id, t, tag), index);
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform(IndividualId id, TimeStep t, StreamTag tag,
                 std::uint32_t index = 0) const {
    if (override_) return (*override_)(id, t, tag, index);
    return detail::to_unit(bits(id, t, tag, index));
  }

  constexpr std::uint64_t row_base(IndividualId id, TimeStep t,
                                   StreamTag tag) const noexcept {
    std::uint64_t x = detail::mix64((key_ ^ tag.value()) + id * 0xd1b54a32d192ed03ULL);
    return detail::mix64(x ^ (static_cast<std::uint64_t>(t) * 0xaef17502108ef2d9ULL));
  }

  static constexpr std::uint64_t finish(std::uint64_t base,
                                        std::uint32_t index) noexcept {
    return detail::mix64(base ^ (static_cast<std::uint64_t>(index) *
                                     0xf1357aea2e62a9c5ULL +
                                 0x2545f4914f6cdd1dULL));
  }

  const Override* override_fn() const noexcept { return override_.get(); }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::shared_ptr<const Override> override_;
};

/// Draws for one (id, t, tag) triple; the per-row part of the hash is
/// computed once, on first use.
class RowDraws {
 public:
  RowDraws(const LatentDraws& draws, IndividualId id, TimeStep t, StreamTag tag)
      : draws_(&draws), id_(id), t_(t), tag_(tag) {}

  double uniform(std::uint32_t index = 0) const {
    if (draws_->override_fn()) [[unlikely]] return forced(index);
    if (!has_base_) {
      base_ = draws_->row_base(id_, t_, tag_);
      has_base_ = true;
    }
    return detail::to_unit(LatentDraws::finish(base_, index));
  }

  IndividualId id() const noexcept { return id_; }
  TimeStep time() const noexcept { return t_; }

 private:
  [[gnu::noinline]] double forced(std::uint32_t index) const {
    return (*draws_->override_fn())(id_, t_, tag_, index);
  }

  const LatentDraws* draws_;
  IndividualId id_;
  TimeStep t_;
  StreamTag tag_;
  mutable std::uint64_t base_ = 0;  // computed on first use
  mutable bool has_base_ = false;
};

}  // namespace msim
