#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "msim/core/population.hpp"

namespace msim {

/// Splits into k contiguous chunks whose sizes differ by at most one; the
/// first n % k chunks get the extra row.
inline std::vector<Population> partition(const Population& pop, std::size_t k) {
  if (k == 0) throw DomainError("partition count must be at least 1");
  if (k == 1) return {pop};
  std::vector<Population> chunks;
  chunks.reserve(k);
  const std::size_t n = pop.size();
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t begin = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    chunks.push_back(pop.slice(begin, begin + len));
    begin += len;
  }
  return chunks;
}

/// Concatenates chunks and orders the result by id.
inline Population merge(const std::vector<Population>& chunks) {
  if (chunks.empty()) throw DomainError("merge requires at least one chunk");
  if (chunks.size() == 1) return chunks.front();
  const auto& domain = chunks.front().shared_domain();
  std::size_t total = 0;
  IndividualId next = 0;
  for (const auto& c : chunks) {
    if (!(c.domain() == *domain)) throw DomainError("merge across different domains");
    total += c.size();
    next = std::max(next, c.next_id());
  }

  std::vector<std::pair<IndividualId, std::pair<std::size_t, std::size_t>>> order;
  order.reserve(total);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto ids = chunks[c].ids();
    for (std::size_t r = 0; r < ids.size(); ++r) order.push_back({ids[r], {c, r}});
  }
  const bool sorted = std::is_sorted(order.begin(), order.end(),
                                     [](const auto& a, const auto& b) { return a.first < b.first; });
  if (!sorted) {
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i].first == order[i - 1].first) {
      throw DomainError("duplicate id " + std::to_string(order[i].first) +
                        " across chunks");
    }
  }

  Population out(domain);
  out.reserve(total);
  std::vector<double> row(domain->variable_count());
  for (const auto& [id, loc] : order) {
    const auto& chunk = chunks[loc.first];
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = chunk.value(loc.second, j);
    out.append_row(id, row);
  }
  out.reserve_ids_through(next);
  return out;
}

}  // namespace msim
