#include "gridshed/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <unordered_map>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

bool all_finite(std::initializer_list<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

Network::Network(std::string name, double base_mva, std::vector<Bus> buses, std::vector<Line> lines,
                 std::vector<Generator> generators, std::vector<Load> loads,
                 std::vector<Shunt> shunts)
    : name_(std::move(name)),
      base_mva_(base_mva),
      buses_(std::move(buses)),
      lines_(std::move(lines)),
      generators_(std::move(generators)),
      loads_(std::move(loads)),
      shunts_(std::move(shunts)) {
  if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) {
    throw ValidationError("baseMVA must be positive");
  }
  std::unordered_map<int, int> seen;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    Bus& bus = buses_[i];
    if (!seen.emplace(bus.id, static_cast<int>(i)).second) {
      throw ValidationError("duplicate bus id " + std::to_string(bus.id));
    }
    if (!all_finite({bus.vmin, bus.vmax}) || !(bus.vmin > 0.0) || bus.vmin > bus.vmax) {
      throw ValidationError("bus " + std::to_string(bus.id) + ": need 0 < vmin <= vmax");
    }
    bus.generators.clear();
    bus.loads.clear();
    bus.shunts.clear();
    bus.lines.clear();
  }
  const int nbus = static_cast<int>(buses_.size());
  auto check_bus = [nbus](int bus, const std::string& what) {
    if (bus < 0 || bus >= nbus) {
      throw ValidationError(what + " references a missing bus");
    }
  };
  for (std::size_t k = 0; k < lines_.size(); ++k) {
    const Line& line = lines_[k];
    const std::string what = "line " + std::to_string(line.id);
    check_bus(line.from_bus, what);
    check_bus(line.to_bus, what);
    if (line.from_bus == line.to_bus) throw ValidationError(what + " is a self-loop");
    if (!all_finite({line.g, line.b, line.g_fr, line.b_fr, line.g_to, line.b_to, line.tap.real(),
                     line.tap.imag(), line.rate, line.angmin, line.angmax, line.risk})) {
      throw ValidationError(what + " has non-finite data");
    }
    if (!(line.rate > 0.0)) throw ValidationError(what + ": thermal limit must be positive");
    if (line.angmin > line.angmax) throw ValidationError(what + ": angmin > angmax");
    if (std::abs(line.tap) == 0.0) throw ValidationError(what + ": zero tap ratio");
    if (line.risk < 0.0) throw ValidationError(what + ": negative risk");
    buses_[line.from_bus].lines.push_back(static_cast<int>(k));
    buses_[line.to_bus].lines.push_back(static_cast<int>(k));
  }
  for (std::size_t k = 0; k < generators_.size(); ++k) {
    const Generator& gen = generators_[k];
    const std::string what = "generator " + std::to_string(gen.id);
    check_bus(gen.bus, what);
    if (!all_finite({gen.pmin, gen.pmax, gen.qmin, gen.qmax})) {
      throw ValidationError(what + " has non-finite limits");
    }
    if (gen.pmin > gen.pmax || gen.qmin > gen.qmax) {
      throw ValidationError(what + " has inverted limits");
    }
    buses_[gen.bus].generators.push_back(static_cast<int>(k));
  }
  for (std::size_t k = 0; k < loads_.size(); ++k) {
    const Load& load = loads_[k];
    const std::string what = "load " + std::to_string(load.id);
    check_bus(load.bus, what);
    if (!all_finite({load.pd, load.qd, load.weight})) {
      throw ValidationError(what + " has non-finite data");
    }
    if (!(load.weight > 0.0)) throw ValidationError(what + ": weight must be positive");
    buses_[load.bus].loads.push_back(static_cast<int>(k));
  }
  for (std::size_t k = 0; k < shunts_.size(); ++k) {
    const Shunt& shunt = shunts_[k];
    const std::string what = "shunt " + std::to_string(shunt.id);
    check_bus(shunt.bus, what);
    if (!all_finite({shunt.gs, shunt.bs})) throw ValidationError(what + " has non-finite data");
    buses_[shunt.bus].shunts.push_back(static_cast<int>(k));
  }
}

double Network::total_weighted_demand() const {
  double total = 0.0;
  for (const Load& load : loads_) total += load.weight * load.pd;
  return total;
}

double Network::total_risk() const {
  double total = 0.0;
  for (const Line& line : lines_) total += line.risk;
  return total;
}

double RiskScenario::total() const {
  double total = 0.0;
  for (double r : risk) total += r;
  return total;
}

// ---------------------------------------------------------------------------
// MATPOWER text reader

namespace {

struct Table {
  int line = 0;  // where the assignment starts
  std::vector<std::vector<double>> rows;
  std::vector<int> row_lines;
};

struct CaseText {
  std::optional<double> base_mva;
  int base_mva_line = 0;
  std::map<std::string, Table> tables;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_string = !in_string;
    if (!in_string && line[i] == '%') return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& token, int line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + token + "'", line);
  }
  if (used != token.size()) throw ParseError("invalid number '" + token + "'", line);
  return value;
}

// Splits matrix content into rows. Rows end at ';' or at a line break.
void add_matrix_text(Table& table, const std::string& text, int line_no,
                     std::vector<double>& pending) {
  std::string token;
  auto flush_token = [&] {
    if (!token.empty()) {
      pending.push_back(parse_number(token, line_no));
      token.clear();
    }
  };
  auto flush_row = [&] {
    flush_token();
    if (!pending.empty()) {
      table.rows.push_back(pending);
      table.row_lines.push_back(line_no);
      pending.clear();
    }
  };
  for (char c : text) {
    if (c == ';') {
      flush_row();
    } else if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      flush_token();
    } else {
      token.push_back(c);
    }
  }
  flush_row();
}

CaseText scan_case(const std::string& text) {
  CaseText result;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  Table* open_table = nullptr;
  std::vector<double> pending;
  bool any_content = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    any_content = true;

    if (open_table != nullptr) {
      const auto close = line.find(']');
      if (close == std::string::npos) {
        add_matrix_text(*open_table, line, line_no, pending);
      } else {
        add_matrix_text(*open_table, line.substr(0, close), line_no, pending);
        const std::string rest = trim(line.substr(close + 1));
        if (!rest.empty() && rest != ";") throw ParseError("unexpected text after ']'", line_no);
        open_table = nullptr;
      }
      continue;
    }

    if (line.rfind("function", 0) == 0) continue;
    if (line.rfind("mpc.", 0) != 0) {
      throw ParseError("unexpected statement '" + line + "'", line_no);
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected '='", line_no);
    const std::string key = trim(line.substr(4, eq - 4));
    std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ParseError("missing value for mpc." + key, line_no);

    if (value.front() == '[') {
      Table& table = result.tables[key];
      table = Table{};
      table.line = line_no;
      value.erase(0, 1);
      const auto close = value.find(']');
      if (close == std::string::npos) {
        add_matrix_text(table, value, line_no, pending);
        open_table = &table;
      } else {
        add_matrix_text(table, value.substr(0, close), line_no, pending);
        const std::string rest = trim(value.substr(close + 1));
        if (!rest.empty() && rest != ";") throw ParseError("unexpected text after ']'", line_no);
      }
    } else if (value.front() == '\'' || value.front() == '{') {
      continue;  // strings and cell arrays (version, bus names) are not used
    } else {
      if (value.back() == ';') value.pop_back();
      const double number = parse_number(trim(value), line_no);
      if (key == "baseMVA") {
        result.base_mva = number;
        result.base_mva_line = line_no;
      }
    }
  }
  if (!any_content) throw ParseError("empty case file", 0);
  if (open_table != nullptr) throw ParseError("unterminated matrix", line_no);
  return result;
}

const Table& require_table(const CaseText& text, const std::string& key, std::size_t min_cols,
                           int eof_line) {
  const auto it = text.tables.find(key);
  if (it == text.tables.end()) throw ParseError("missing mpc." + key, eof_line);
  const Table& table = it->second;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() < min_cols) {
      throw ParseError("mpc." + key + " row needs at least " + std::to_string(min_cols) +
                           " columns",
                       table.row_lines[r]);
    }
  }
  return table;
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Conservative apparent-power bound for branches whose rating is left at 0
// (MATPOWER's "unlimited"): |S| <= Vmax_i (|y + y_sh| Vmax_i / |t|^2 + |y| Vmax_j / |t|)
// on each end, taking the larger side.
double surrogate_rate(const Line& line, const Bus& from, const Bus& to) {
  const std::complex<double> y(line.g, line.b);
  const double t = std::abs(line.tap);
  const double fr = from.vmax * (std::abs(y + std::complex<double>(line.g_fr, line.b_fr)) *
                                     from.vmax / (t * t) +
                                 std::abs(y) * to.vmax / t);
  const double tt = to.vmax * (std::abs(y + std::complex<double>(line.g_to, line.b_to)) * to.vmax +
                               std::abs(y) * from.vmax / t);
  return std::max(fr, tt);
}

}  // namespace

Network parse_case_text(const std::string& text, const std::string& name) {
  const CaseText scanned = scan_case(text);
  const int eof_line = static_cast<int>(std::count(text.begin(), text.end(), '\n')) + 1;
  if (!scanned.base_mva) throw ParseError("missing mpc.baseMVA", eof_line);
  const double base = *scanned.base_mva;
  if (!(base > 0.0)) throw ParseError("baseMVA must be positive", scanned.base_mva_line);

  const Table& bus_table = require_table(scanned, "bus", 13, eof_line);
  const Table& gen_table = require_table(scanned, "gen", 10, eof_line);
  const Table& branch_table = require_table(scanned, "branch", 11, eof_line);

  std::vector<Bus> buses;
  std::vector<Load> loads;
  std::vector<Shunt> shunts;
  std::unordered_map<int, int> index_of;
  for (std::size_t r = 0; r < bus_table.rows.size(); ++r) {
    const auto& row = bus_table.rows[r];
    Bus bus;
    bus.id = static_cast<int>(row[0]);
    bus.vmax = row[11];
    bus.vmin = row[12];
    if (!index_of.emplace(bus.id, static_cast<int>(buses.size())).second) {
      throw ParseError("duplicate bus " + std::to_string(bus.id), bus_table.row_lines[r]);
    }
    const int idx = static_cast<int>(buses.size());
    buses.push_back(bus);
    if (row[2] != 0.0 || row[3] != 0.0) {
      loads.push_back(Load{static_cast<int>(loads.size()) + 1, idx, row[2] / base, row[3] / base, 1.0});
    }
    if (row[4] != 0.0 || row[5] != 0.0) {
      shunts.push_back(Shunt{static_cast<int>(shunts.size()) + 1, idx, row[4] / base, row[5] / base});
    }
  }

  auto bus_index = [&](double raw, int line_no) {
    const auto it = index_of.find(static_cast<int>(raw));
    if (it == index_of.end()) {
      throw ValidationError("line " + std::to_string(line_no) + ": reference to unknown bus " +
                            std::to_string(static_cast<int>(raw)));
    }
    return it->second;
  };

  if (const auto it = scanned.tables.find("shunt"); it != scanned.tables.end()) {
    const Table& table = require_table(scanned, "shunt", 3, eof_line);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      shunts.push_back(Shunt{static_cast<int>(shunts.size()) + 1,
                             bus_index(row[0], table.row_lines[r]), row[1] / base, row[2] / base});
    }
  }

  std::vector<Generator> gens;
  for (std::size_t r = 0; r < gen_table.rows.size(); ++r) {
    const auto& row = gen_table.rows[r];
    if (row[7] <= 0.0) continue;  // out of service
    Generator gen;
    gen.id = static_cast<int>(r) + 1;
    gen.bus = bus_index(row[0], gen_table.row_lines[r]);
    gen.qmax = row[3] / base;
    gen.qmin = row[4] / base;
    gen.pmax = row[8] / base;
    gen.pmin = row[9] / base;
    gens.push_back(gen);
  }

  std::vector<Line> lines;
  for (std::size_t r = 0; r < branch_table.rows.size(); ++r) {
    const auto& row = branch_table.rows[r];
    const int line_no = branch_table.row_lines[r];
    if (row[10] <= 0.0) continue;
    Line line;
    line.id = static_cast<int>(r) + 1;
    line.from_bus = bus_index(row[0], line_no);
    line.to_bus = bus_index(row[1], line_no);
    const std::complex<double> z(row[2], row[3]);
    if (std::abs(z) == 0.0) throw ParseError("branch with zero impedance", line_no);
    const std::complex<double> y = 1.0 / z;
    line.g = y.real();
    line.b = y.imag();
    line.b_fr = row[4] / 2.0;
    line.b_to = row[4] / 2.0;
    const double ratio = row[8] == 0.0 ? 1.0 : row[8];
    line.tap = std::polar(ratio, row[9] * kDegToRad);

    const bool has_angles = row.size() >= 13;
    double angmin = has_angles ? row[11] : 0.0;
    double angmax = has_angles ? row[12] : 0.0;
    // Absent, all-zero, or +/-360 limits mean "unconstrained" in MATPOWER files.
    if (!has_angles || (angmin == 0.0 && angmax == 0.0)) {
      angmin = -kDefaultAngleLimitDeg;
      angmax = kDefaultAngleLimitDeg;
    }
    if (angmin <= -360.0) angmin = -kDefaultAngleLimitDeg;
    if (angmax >= 360.0) angmax = kDefaultAngleLimitDeg;
    line.angmin = angmin * kDegToRad;
    line.angmax = angmax * kDegToRad;

    line.rate = row[5] / base;
    if (line.rate <= 0.0) {
      line.rate = surrogate_rate(line, buses[line.from_bus], buses[line.to_bus]);
    }
    lines.push_back(line);
  }

  return Network(name, base, std::move(buses), std::move(lines), std::move(gens), std::move(loads),
                 std::move(shunts));
}

Network parse_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_case_text(buffer.str(), path.stem().string());
}

SanitizeResult sanitize_negative_loads(const Network& net) {
  std::vector<Load> loads = net.loads();
  int modified = 0;
  for (Load& load : loads) {
    if (load.pd < 0.0) {
      load.pd = 0.0;
      load.qd = 0.0;
      ++modified;
    }
  }
  return {Network(net.name(), net.base_mva(), net.buses(), net.lines(), net.generators(),
                  std::move(loads), net.shunts()),
          modified};
}

RiskScenario generate_risk_scenario(const Network& net, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  RiskScenario scenario;
  scenario.seed = seed;
  scenario.risk.reserve(net.lines().size());
  for (std::size_t k = 0; k < net.lines().size(); ++k) {
    scenario.risk.push_back(static_cast<double>(engine() >> 11) * 0x1.0p-53);
  }
  return scenario;
}

Network apply_risk(const Network& net, const RiskScenario& scenario) {
  if (scenario.risk.size() != net.lines().size()) {
    throw InputError("risk scenario has " + std::to_string(scenario.risk.size()) +
                     " values for " + std::to_string(net.lines().size()) + " lines");
  }
  std::vector<Line> lines = net.lines();
  for (std::size_t k = 0; k < lines.size(); ++k) lines[k].risk = scenario.risk[k];
  return Network(net.name(), net.base_mva(), net.buses(), std::move(lines), net.generators(),
                 net.loads(), net.shunts());
}

// ---------------------------------------------------------------------------
// JSON dump

nlohmann::json to_json(const Network& net) {
  using nlohmann::json;
  json j;
  j["format"] = "gridshed-network";
  j["version"] = 1;
  j["name"] = net.name();
  j["base_mva"] = net.base_mva();
  json buses = json::array();
  for (const Bus& b : net.buses()) buses.push_back({{"id", b.id}, {"vmin", b.vmin}, {"vmax", b.vmax}});
  json lines = json::array();
  for (const Line& l : net.lines()) {
    lines.push_back({{"id", l.id},
                     {"from_bus", l.from_bus},
                     {"to_bus", l.to_bus},
                     {"g", l.g},
                     {"b", l.b},
                     {"g_fr", l.g_fr},
                     {"b_fr", l.b_fr},
                     {"g_to", l.g_to},
                     {"b_to", l.b_to},
                     {"tap", {l.tap.real(), l.tap.imag()}},
                     {"rate", l.rate},
                     {"angmin", l.angmin},
                     {"angmax", l.angmax},
                     {"risk", l.risk}});
  }
  json gens = json::array();
  for (const Generator& g : net.generators()) {
    gens.push_back({{"id", g.id}, {"bus", g.bus}, {"pmin", g.pmin}, {"pmax", g.pmax},
                    {"qmin", g.qmin}, {"qmax", g.qmax}});
  }
  json loads = json::array();
  for (const Load& d : net.loads()) {
    loads.push_back({{"id", d.id}, {"bus", d.bus}, {"pd", d.pd}, {"qd", d.qd}, {"weight", d.weight}});
  }
  json shunts = json::array();
  for (const Shunt& s : net.shunts()) {
    shunts.push_back({{"id", s.id}, {"bus", s.bus}, {"gs", s.gs}, {"bs", s.bs}});
  }
  j["buses"] = std::move(buses);
  j["lines"] = std::move(lines);
  j["generators"] = std::move(gens);
  j["loads"] = std::move(loads);
  j["shunts"] = std::move(shunts);
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gridshed-network" || j.at("version") != 1) {
      throw ParseError("unsupported network document", 0);
    }
    std::vector<Bus> buses;
    for (const auto& b : j.at("buses")) {
      Bus bus;
      bus.id = b.at("id");
      bus.vmin = b.at("vmin");
      bus.vmax = b.at("vmax");
      buses.push_back(bus);
    }
    std::vector<Line> lines;
    for (const auto& l : j.at("lines")) {
      Line line;
      line.id = l.at("id");
      line.from_bus = l.at("from_bus");
      line.to_bus = l.at("to_bus");
      line.g = l.at("g");
      line.b = l.at("b");
      line.g_fr = l.at("g_fr");
      line.b_fr = l.at("b_fr");
      line.g_to = l.at("g_to");
      line.b_to = l.at("b_to");
      line.tap = {l.at("tap").at(0).get<double>(), l.at("tap").at(1).get<double>()};
      line.rate = l.at("rate");
      line.angmin = l.at("angmin");
      line.angmax = l.at("angmax");
      line.risk = l.at("risk");
      lines.push_back(line);
    }
    std::vector<Generator> gens;
    for (const auto& g : j.at("generators")) {
      gens.push_back(Generator{g.at("id"), g.at("bus"), g.at("pmin"), g.at("pmax"), g.at("qmin"),
                               g.at("qmax")});
    }
    std::vector<Load> loads;
    for (const auto& d : j.at("loads")) {
      loads.push_back(Load{d.at("id"), d.at("bus"), d.at("pd"), d.at("qd"), d.at("weight")});
    }
    std::vector<Shunt> shunts;
    for (const auto& s : j.at("shunts")) {
      shunts.push_back(Shunt{s.at("id"), s.at("bus"), s.at("gs"), s.at("bs")});
    }
    return Network(j.at("name"), j.at("base_mva"), std::move(buses), std::move(lines),
                   std::move(gens), std::move(loads), std::move(shunts));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed network document: ") + e.what(), 0);
  }
}

}  // namespace gridshed
