#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "hsc/errors.hpp"

namespace hsc {

/// Shortest-independent, round-trippable text form (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Comma-separated table: header row, then one row per index of the
/// (equal-length) columns.
inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<const std::vector<double>*>& columns) {
  if (header.size() != columns.size()) throw DomainError("write_csv: header/column count mismatch");
  const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
  for (const auto* c : columns) {
    if (c->size() != rows) throw DomainError("write_csv: columns differ in length");
  }
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << format_double((*columns[k])[i]);
    os << '\n';
  }
}

}  // namespace hsc
