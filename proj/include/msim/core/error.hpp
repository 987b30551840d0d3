#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace msim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A name or value does not conform to the simulation domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An event produced an invalid result (undeclared write, non-finite value,
/// wrong row count, dead-row modification).
class EventError : public Error {
 public:
  EventError(const std::string& what, std::string event, std::int64_t time,
             std::uint64_t id)
      : Error(what), event_(std::move(event)), time_(time), id_(id) {}

  const std::string& event() const noexcept { return event_; }
  std::int64_t time() const noexcept { return time_; }
  std::uint64_t id() const noexcept { return id_; }

 private:
  std::string event_;
  std::int64_t time_;
  std::uint64_t id_;
};

/// Numerical routine could not produce a result (non-PD matrix, separation,
/// non-finite objective at the starting point, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace msim
