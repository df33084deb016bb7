#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridshed/network.hpp"

namespace gridshed::testing {

inline std::filesystem::path case_path(const std::string& file) {
  return std::filesystem::path(GRIDSHED_DATA_DIR) / "cases" / file;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Data rows of `mpc.<table> = [ ... ];`, counted straight from the text.
inline int count_table_rows(const std::string& text, const std::string& table) {
  std::istringstream in(text);
  std::string line;
  bool inside = false;
  int rows = 0;
  const std::string open = "mpc." + table + " = [";
  while (std::getline(in, line)) {
    if (!inside) {
      if (line.rfind(open, 0) == 0) inside = true;
      continue;
    }
    if (line.find("];") != std::string::npos) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.find('%') == line.find_first_not_of(" \t")) continue;
    ++rows;
  }
  return rows;
}

/// Two buses, one line, a generator on bus 1 and loads on both buses.
inline Network two_bus_network(double pd1 = 0.5, double pd2 = 1.0) {
  std::vector<Bus> buses{Bus{1, 0.9, 1.1, {}, {}, {}, {}}, Bus{2, 0.9, 1.1, {}, {}, {}, {}}};
  Line line;
  line.id = 1;
  line.from_bus = 0;
  line.to_bus = 1;
  line.g = 1.0;
  line.b = -10.0;
  line.rate = 2.0;
  line.angmin = -0.5;
  line.angmax = 0.5;
  std::vector<Generator> gens{Generator{1, 0, 0.0, 3.0, -2.0, 2.0}};
  std::vector<Load> loads{Load{1, 0, pd1, 0.1, 1.0}, Load{2, 1, pd2, 0.2, 1.0}};
  return Network("two_bus", 100.0, buses, {line}, gens, loads, {});
}

}  // namespace gridshed::testing
