#pragma once

// Fixed-column CSV export of a SimLog. Numbers use the shortest decimal form
// that parses back to the same double.

#include "sflc/simulation.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sflc::csv {

inline constexpr std::array<std::string_view, 20> kColumns = {
    "t",  "x",   "y",   "theta", "v1", "v2", "u1", "u2",    "u3",     "sigma",
    "e1x", "e1y", "e2", "e3",    "n1", "n2", "n3", "power", "energy", "detA"};

using Row = std::array<double, kColumns.size()>;

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// CSV projection of one record: theta wrapped, applied (post-noise) input.
inline Row to_row(const SimRecord& r) {
  return {r.t,
          r.state.x,
          r.state.y,
          mecanum::wrap_angle(r.state.theta),
          r.state.v1,
          r.state.v2,
          r.u_applied.u1,
          r.u_applied.u2,
          r.u_applied.u3,
          static_cast<double>(r.sigma.value()),
          r.e1.x(),
          r.e1.y(),
          r.e2,
          r.e3,
          r.noise.x(),
          r.noise.y(),
          r.noise.z(),
          r.power,
          r.energy,
          r.det_a};
}

inline void write(std::ostream& os, const SimLog& log) {
  for (std::size_t i = 0; i < kColumns.size(); ++i) os << (i ? "," : "") << kColumns[i];
  os << '\n';
  for (const auto& rec : log.rows) {
    const Row row = to_row(rec);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      if (i == 9) os << rec.sigma.value();
      else os << format_double(row[i]);
    }
    os << '\n';
  }
}

inline std::vector<Row> parse(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw CsvError("empty CSV");
  std::string expected;
  for (std::size_t i = 0; i < kColumns.size(); ++i) expected += (i ? "," : "") + std::string(kColumns[i]);
  if (line != expected) throw CsvError("unexpected CSV header: " + line);

  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    Row row{};
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      if (col >= row.size()) throw CsvError("too many fields on line " + std::to_string(lineno));
      const auto res = std::from_chars(p, end, row[col]);
      if (res.ec != std::errc()) throw CsvError("bad number on line " + std::to_string(lineno));
      ++col;
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw CsvError("bad separator on line " + std::to_string(lineno));
      ++p;
    }
    if (col != row.size()) throw CsvError("too few fields on line " + std::to_string(lineno));
    rows.push_back(row);
  }
  return rows;
}

inline std::string to_string(const SimLog& log) {
  std::ostringstream os;
  write(os, log);
  return os.str();
}

}  // namespace sflc::csv
