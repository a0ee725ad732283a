// Copyright 2026 The gpcinfer authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gpcinfer/common.hpp>

namespace gpcinfer {

/// Renders a double with 12 significant digits, round-trip safe for the
/// precision this project persists.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Round-trip-exact formatting for values that downstream tools recompute.
inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    throw ConfigError("csv: missing column '" + name + "'");
  }

  double value(std::size_t i, int j) const {
    const std::string& cell = rows.at(i).at(static_cast<std::size_t>(j));
    try {
      std::size_t pos = 0;
      const double v = std::stod(cell, &pos);
      if (pos != cell.size()) throw std::invalid_argument(cell);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("csv: non-numeric cell '" + cell + "'");
    }
  }
};

inline std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(strip(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

/// Reads a comma-separated table with a header row. Blank lines and lines
/// starting with '#' are skipped.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split_csv_line(s);
      continue;
    }
    auto cells = split_csv_line(s);
    if (cells.size() != t.header.size())
      throw ConfigError("csv: row with " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(t.header.size()) + " in " + path.string());
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ConfigError("csv: empty file " + path.string());
  return t;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("csv: cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

}  // namespace gpcinfer
