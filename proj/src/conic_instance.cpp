#include "gridshed/conic_instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "gridshed/errors.hpp"

namespace gridshed {

double LinearRow::activity(std::span<const double> x) const {
  double sum = 0.0;
  for (const Term& t : terms) sum += t.coef * x[t.col];
  return sum;
}

int ConicMipInstance::add_column(std::string col_name, double lower, double upper, bool integer) {
  columns.push_back(Column{std::move(col_name), lower, upper, integer});
  objective.push_back(0.0);
  return static_cast<int>(columns.size()) - 1;
}

void ConicMipInstance::add_rows(std::vector<LinearRow> block) {
  rows.insert(rows.end(), std::make_move_iterator(block.begin()),
              std::make_move_iterator(block.end()));
}

void ConicMipInstance::add_cones(std::vector<RotatedCone> block) {
  cones.insert(cones.end(), std::make_move_iterator(block.begin()),
               std::make_move_iterator(block.end()));
}

std::vector<int> ConicMipInstance::integer_columns() const {
  std::vector<int> out;
  for (int j = 0; j < num_columns(); ++j) {
    if (columns[j].integer) out.push_back(j);
  }
  return out;
}

double ConicMipInstance::objective_value(std::span<const double> x) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < objective.size(); ++j) sum += objective[j] * x[j];
  return sum;
}

std::vector<std::string> validate(const ConicMipInstance& instance) {
  std::vector<std::string> errors;
  const int n = instance.num_columns();
  if (static_cast<int>(instance.objective.size()) != n) {
    errors.push_back("objective has " + std::to_string(instance.objective.size()) +
                     " coefficients for " + std::to_string(n) + " columns");
  }
  for (int j = 0; j < n; ++j) {
    const Column& c = instance.columns[j];
    if (std::isnan(c.lower) || std::isnan(c.upper) || c.lower > c.upper) {
      errors.push_back("column " + std::to_string(j) + " (" + c.name + ") has inverted bounds");
    }
  }
  auto in_range = [n](int col) { return col >= 0 && col < n; };
  for (std::size_t i = 0; i < instance.rows.size(); ++i) {
    const LinearRow& row = instance.rows[i];
    for (const Term& t : row.terms) {
      if (!in_range(t.col)) {
        errors.push_back("row " + std::to_string(i) + " (" + row.name + ") references column " +
                         std::to_string(t.col));
      }
    }
    if (std::isnan(row.rhs)) errors.push_back("row " + std::to_string(i) + " has NaN rhs");
  }
  for (std::size_t k = 0; k < instance.cones.size(); ++k) {
    const RotatedCone& cone = instance.cones[k];
    const std::string label = "cone " + std::to_string(k) + " (" + cone.name + ")";
    std::set<int> lhs_cols;
    bool dangling = false;
    for (const Term& t : cone.lhs) {
      if (!in_range(t.col)) dangling = true;
      if (!lhs_cols.insert(t.col).second) errors.push_back(label + " repeats a left-hand column");
    }
    if (!in_range(cone.rhs_a.col) || !in_range(cone.rhs_b.col)) dangling = true;
    if (dangling) errors.push_back(label + " references a missing column");
    if (lhs_cols.count(cone.rhs_a.col) != 0 || lhs_cols.count(cone.rhs_b.col) != 0) {
      errors.push_back(label + " uses a column on both sides");
    }
  }
  return errors;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json bound_to_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

double bound_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ParseError("invalid bound '" + s + "'", 0);
  }
  return j.get<double>();
}

nlohmann::json terms_to_json(const std::vector<Term>& terms) {
  nlohmann::json out = nlohmann::json::array();
  for (const Term& t : terms) out.push_back({t.col, t.coef});
  return out;
}

std::vector<Term> terms_from_json(const nlohmann::json& j) {
  std::vector<Term> out;
  for (const auto& t : j) out.push_back(Term{t.at(0).get<int>(), t.at(1).get<double>()});
  return out;
}

const char* sense_token(RowSense s) {
  switch (s) {
    case RowSense::kLessEqual: return "<=";
    case RowSense::kEqual: return "=";
    case RowSense::kGreaterEqual: return ">=";
  }
  return "?";
}

RowSense sense_from_token(const std::string& s) {
  if (s == "<=") return RowSense::kLessEqual;
  if (s == "=") return RowSense::kEqual;
  if (s == ">=") return RowSense::kGreaterEqual;
  throw ParseError("invalid row sense '" + s + "'", 0);
}

}  // namespace

nlohmann::json to_json(const ConicMipInstance& instance) {
  using nlohmann::json;
  json j;
  j["format"] = "gridshed-instance";
  j["version"] = kInstanceFormatVersion;
  j["name"] = instance.name;
  j["sense"] = instance.sense == ObjectiveSense::kMaximize ? "max" : "min";
  json cols = json::array();
  for (const Column& c : instance.columns) {
    cols.push_back({{"name", c.name},
                    {"lower", bound_to_json(c.lower)},
                    {"upper", bound_to_json(c.upper)},
                    {"integer", c.integer}});
  }
  j["columns"] = std::move(cols);
  j["objective"] = instance.objective;
  json rows = json::array();
  for (const LinearRow& r : instance.rows) {
    rows.push_back({{"name", r.name},
                    {"terms", terms_to_json(r.terms)},
                    {"sense", sense_token(r.sense)},
                    {"rhs", r.rhs}});
  }
  j["rows"] = std::move(rows);
  json cones = json::array();
  for (const RotatedCone& c : instance.cones) {
    cones.push_back({{"name", c.name},
                     {"lhs", terms_to_json(c.lhs)},
                     {"rhs", json::array({json::array({c.rhs_a.col, c.rhs_a.coef}),
                                          json::array({c.rhs_b.col, c.rhs_b.coef})})}});
  }
  j["cones"] = std::move(cones);
  return j;
}

ConicMipInstance instance_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gridshed-instance") throw ParseError("not a gridshed instance", 0);
    const int version = j.at("version").get<int>();
    if (version != kInstanceFormatVersion) {
      throw ParseError("unsupported instance version " + std::to_string(version), 0);
    }
    ConicMipInstance inst;
    inst.name = j.at("name").get<std::string>();
    const std::string sense = j.at("sense").get<std::string>();
    if (sense != "max" && sense != "min") throw ParseError("invalid objective sense", 0);
    inst.sense = sense == "max" ? ObjectiveSense::kMaximize : ObjectiveSense::kMinimize;
    for (const auto& c : j.at("columns")) {
      inst.columns.push_back(Column{c.at("name").get<std::string>(), bound_from_json(c.at("lower")),
                                    bound_from_json(c.at("upper")), c.at("integer").get<bool>()});
    }
    inst.objective = j.at("objective").get<std::vector<double>>();
    for (const auto& r : j.at("rows")) {
      inst.rows.push_back(LinearRow{r.at("name").get<std::string>(), terms_from_json(r.at("terms")),
                                    sense_from_token(r.at("sense").get<std::string>()),
                                    r.at("rhs").get<double>()});
    }
    for (const auto& c : j.at("cones")) {
      const auto& rhs = c.at("rhs");
      if (rhs.size() != 2) throw ParseError("cone needs two right-hand factors", 0);
      inst.cones.push_back(RotatedCone{c.at("name").get<std::string>(), terms_from_json(c.at("lhs")),
                                       Term{rhs.at(0).at(0).get<int>(), rhs.at(0).at(1).get<double>()},
                                       Term{rhs.at(1).at(0).get<int>(), rhs.at(1).at(1).get<double>()}});
    }
    if (auto errors = validate(inst); !errors.empty()) {
      throw ParseError("invalid instance: " + errors.front(), 0);
    }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed instance document: ") + e.what(), 0);
  }
}

void serialize(const ConicMipInstance& instance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(instance).dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ConicMipInstance deserialize(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed instance file: ") + e.what(), 0);
  }
  return instance_from_json(j);
}

// ---------------------------------------------------------------------------
// LP format

namespace {

std::string lp_name(const ConicMipInstance& inst, int j) {
  // LP identifiers may not contain brackets or commas.
  std::string s = inst.columns[j].name.empty() ? "x" + std::to_string(j) : inst.columns[j].name;
  for (char& c : s) {
    if (c == '[' || c == ']' || c == ',' || c == ' ' || c == '(' || c == ')') c = '_';
  }
  return s + "_" + std::to_string(j);
}

void write_terms(std::ostream& out, const ConicMipInstance& inst, const std::vector<Term>& terms) {
  bool first = true;
  for (const Term& t : terms) {
    if (t.coef == 0.0) continue;
    out << (t.coef < 0 ? " - " : (first ? " " : " + ")) << std::abs(t.coef) << ' '
        << lp_name(inst, t.col);
    first = false;
  }
  if (first) out << " 0 " << lp_name(inst, 0);
}

}  // namespace

std::string to_lp_format(const ConicMipInstance& inst) {
  if (!inst.cones.empty()) {
    throw BuildError("LP export needs a fully linear instance; found " +
                     std::to_string(inst.cones.size()) + " cones");
  }
  std::ostringstream out;
  out << std::setprecision(17);
  out << "\\ " << inst.name << '\n';
  out << (inst.sense == ObjectiveSense::kMaximize ? "Maximize\n" : "Minimize\n") << " obj:";
  std::vector<Term> obj;
  for (int j = 0; j < inst.num_columns(); ++j) {
    if (inst.objective[j] != 0.0) obj.push_back(Term{j, inst.objective[j]});
  }
  write_terms(out, inst, obj);
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < inst.rows.size(); ++i) {
    const LinearRow& r = inst.rows[i];
    out << " r" << i << ':';
    write_terms(out, inst, r.terms);
    out << ' ' << sense_token(r.sense) << ' ' << r.rhs << '\n';
  }
  out << "Bounds\n";
  for (int j = 0; j < inst.num_columns(); ++j) {
    const Column& c = inst.columns[j];
    const std::string name = lp_name(inst, j);
    if (c.lower == -kInf && c.upper == kInf) {
      out << ' ' << name << " free\n";
    } else if (c.lower == -kInf) {
      out << " -inf <= " << name << " <= " << c.upper << '\n';
    } else if (c.upper == kInf) {
      out << ' ' << name << " >= " << c.lower << '\n';
    } else {
      out << ' ' << c.lower << " <= " << name << " <= " << c.upper << '\n';
    }
  }
  const auto ints = inst.integer_columns();
  if (!ints.empty()) {
    out << "General\n";
    for (int j : ints) out << ' ' << lp_name(inst, j) << '\n';
  }
  out << "End\n";
  return out.str();
}

void write_lp(const ConicMipInstance& instance, const std::filesystem::path& path) {
  const std::string text = to_lp_format(instance);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Point audit

double ViolationReport::max() const {
  return std::max(std::max(linear, cone), std::max(bounds, integrality));
}

double cone_violation(const RotatedCone& cone, std::span<const double> x) {
  double sq = 0.0;
  for (const Term& t : cone.lhs) {
    const double v = t.coef * x[t.col];
    sq += v * v;
  }
  const double a = cone.rhs_a.coef * x[cone.rhs_a.col];
  const double b = cone.rhs_b.coef * x[cone.rhs_b.col];
  const double sign_violation = std::max(0.0, std::max(-a, -b));
  const double radius = std::sqrt(std::max(0.0, a) * std::max(0.0, b));
  return std::max(sign_violation, std::sqrt(sq) - radius);
}

ViolationReport check_point(const ConicMipInstance& inst, std::span<const double> x) {
  ViolationReport report;
  for (int j = 0; j < inst.num_columns(); ++j) {
    const Column& c = inst.columns[j];
    report.bounds = std::max({report.bounds, c.lower - x[j], x[j] - c.upper});
    if (c.integer) {
      report.integrality = std::max(report.integrality, std::abs(x[j] - std::round(x[j])));
    }
  }
  for (std::size_t i = 0; i < inst.rows.size(); ++i) {
    const LinearRow& r = inst.rows[i];
    const double act = r.activity(x);
    double v = 0.0;
    switch (r.sense) {
      case RowSense::kLessEqual: v = act - r.rhs; break;
      case RowSense::kGreaterEqual: v = r.rhs - act; break;
      case RowSense::kEqual: v = std::abs(act - r.rhs); break;
    }
    if (v > report.linear) {
      report.linear = v;
      report.worst_row = static_cast<int>(i);
    }
  }
  for (std::size_t k = 0; k < inst.cones.size(); ++k) {
    const double v = cone_violation(inst.cones[k], x);
    if (v > report.cone) {
      report.cone = v;
      report.worst_cone = static_cast<int>(k);
    }
  }
  return report;
}

}  // namespace gridshed
