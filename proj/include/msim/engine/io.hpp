#pragma once

#include <bit>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "msim/core/population.hpp"

namespace msim {

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DomainError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// One row per individual; first column is the id, then every variable.
inline void write_csv(const Population& pop, std::ostream& os) {
  const auto& vars = pop.domain().variables();
  os << "id";
  for (const auto& v : vars) os << ',' << v.name;
  os << '\n';
  std::string line;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    line = std::to_string(pop.id(r));
    for (std::size_t j = 0; j < vars.size(); ++j) {
      line += ',';
      line += format_double(pop.value(r, j));
    }
    line += '\n';
    os << line;
  }
}

inline Population read_csv(const DomainPtr& domain, std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DomainError("empty population csv");
  auto header = split_csv_line(line);
  const auto& vars = domain->variables();
  if (header.size() != vars.size() + 1 || header[0] != "id") {
    throw DomainError("population csv header does not match the domain");
  }
  for (std::size_t j = 0; j < vars.size(); ++j) {
    if (header[j + 1] != vars[j].name) {
      throw DomainError("population csv column '" + header[j + 1] + "' where '" +
                        vars[j].name + "' was expected");
    }
  }
  Population pop(domain);
  std::vector<double> row(vars.size());
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != vars.size() + 1) throw DomainError("ragged population csv row");
    IndividualId id = 0;
    auto res = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), id);
    if (res.ec != std::errc{}) throw DomainError("bad id '" + cells[0] + "'");
    for (std::size_t j = 0; j < vars.size(); ++j) row[j] = parse_double(cells[j + 1]);
    pop.append_row(id, row);
  }
  return pop;
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  U u = std::bit_cast<U>(v);
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <class T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof b)) throw DomainError("truncated PSIM1 stream");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(b[i]) << (8 * i);
  return std::bit_cast<T>(u);
}

}  // namespace detail

inline constexpr char kPsimMagic[5] = {'P', 'S', 'I', 'M', '1'};

/// Columnar binary export. Layout (all little-endian):
///   "PSIM1", u64 rows, u32 columns, u8 has_masks,
///   per column: u32 name length, name bytes,
///   u64 ids[rows], then per column f64 values[rows],
///   then, if has_masks, per column ceil(rows/8) bytes of observed bits.
/// `observed`, when given, holds one 0/1 flag per cell in column-major order.
inline void write_psim(const Population& pop, std::ostream& os,
                       const std::vector<std::vector<bool>>* observed = nullptr) {
  const auto& vars = pop.domain().variables();
  const std::size_t n = pop.size();
  os.write(kPsimMagic, sizeof kPsimMagic);
  detail::put_le<std::uint64_t>(os, n);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(vars.size()));
  detail::put_le<std::uint8_t>(os, observed ? 1 : 0);
  for (const auto& v : vars) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.name.size()));
    os.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
  }
  for (std::size_t r = 0; r < n; ++r) detail::put_le<std::uint64_t>(os, pop.id(r));
  for (std::size_t j = 0; j < vars.size(); ++j) {
    for (double x : pop.column(j)) detail::put_le<double>(os, x);
  }
  if (observed) {
    if (observed->size() != vars.size()) throw DomainError("mask plane count mismatch");
    for (const auto& mask : *observed) {
      if (mask.size() != n) throw DomainError("mask length mismatch");
      for (std::size_t r = 0; r < n; r += 8) {
        std::uint8_t byte = 0;
        for (std::size_t b = 0; b < 8 && r + b < n; ++b) {
          if (mask[r + b]) byte |= static_cast<std::uint8_t>(1u << b);
        }
        detail::put_le<std::uint8_t>(os, byte);
      }
    }
  }
}

struct PsimContents {
  Population population;
  std::vector<std::vector<bool>> observed;  // empty when the file has no masks
};

inline PsimContents read_psim(const DomainPtr& domain, std::istream& is) {
  char magic[5];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kPsimMagic, sizeof magic) != 0) {
    throw DomainError("not a PSIM1 stream");
  }
  const auto n = detail::get_le<std::uint64_t>(is);
  const auto m = detail::get_le<std::uint32_t>(is);
  const bool has_masks = detail::get_le<std::uint8_t>(is) != 0;
  const auto& vars = domain->variables();
  if (m != vars.size()) throw DomainError("PSIM1 column count does not match the domain");
  for (std::size_t j = 0; j < m; ++j) {
    const auto len = detail::get_le<std::uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DomainError("truncated PSIM1 stream");
    if (name != vars[j].name) throw DomainError("PSIM1 column '" + name + "' not in domain order");
  }
  std::vector<IndividualId> ids(n);
  for (auto& id : ids) id = detail::get_le<std::uint64_t>(is);
  std::vector<std::vector<double>> cols(m, std::vector<double>(n));
  for (auto& c : cols) {
    for (auto& x : c) x = detail::get_le<double>(is);
  }
  PsimContents out{Population(domain), {}};
  out.population.reserve(n);
  std::vector<double> row(m);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < m; ++j) row[j] = cols[j][r];
    out.population.append_row(ids[r], row);
  }
  if (has_masks) {
    out.observed.assign(m, std::vector<bool>(n));
    for (auto& mask : out.observed) {
      for (std::size_t r = 0; r < n; r += 8) {
        const auto byte = detail::get_le<std::uint8_t>(is);
        for (std::size_t b = 0; b < 8 && r + b < n; ++b) mask[r + b] = (byte >> b) & 1u;
      }
    }
  }
  return out;
}

}  // namespace msim
