#include "gridshed/formulation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numbers>

#include "gridshed/errors.hpp"
#include "gridshed/relaxation_cuts.hpp"

namespace gridshed {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

std::string indexed(const char* base, std::size_t i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}

LinearRow row(std::string name, std::vector<Term> terms, RowSense sense, double rhs) {
  std::erase_if(terms, [](const Term& t) { return t.coef == 0.0; });
  return LinearRow{std::move(name), std::move(terms), sense, rhs};
}

bool uses_ac_variables(FormulationKind kind) { return kind != FormulationKind::kDcOps; }
bool uses_thermal_y(FormulationKind kind) {
  return kind == FormulationKind::kSocOpsT || kind == FormulationKind::kSocOpsM ||
         kind == FormulationKind::kSocOpsS;
}
bool uses_voltage_y(FormulationKind kind) {
  return kind == FormulationKind::kSocOpsM || kind == FormulationKind::kSocOpsS;
}

class ColumnAllocator {
 public:
  ColumnAllocator(ConicMipInstance& inst, VariableMap& vmap) : inst_(inst), vmap_(vmap) {}

  int add(const char* base, std::size_t i, double lo, double hi, bool integer = false) {
    std::string name = indexed(base, i);
    const int col = inst_.add_column(name, lo, hi, integer);
    vmap_.symbols.push_back(std::move(name));
    return col;
  }

  void fill(std::vector<int>& target, const char* base, std::size_t n,
            const std::function<std::pair<double, double>(std::size_t)>& bounds,
            bool integer = false) {
    target.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [lo, hi] = bounds(i);
      target[i] = add(base, i, lo, hi, integer);
    }
  }

 private:
  ConicMipInstance& inst_;
  VariableMap& vmap_;
};

double square(double v) { return v * v; }

// Columns for every variable `kind` uses. Switch columns are binary unless a
// fixed topology is given, in which case they are fixed continuous columns.
VariableMap allocate(const Network& net, FormulationKind kind, ConicMipInstance& inst,
                     const std::vector<LineBounds>& bounds, const Topology* fixed = nullptr) {
  VariableMap vm;
  ColumnAllocator alloc(inst, vm);
  const auto& buses = net.buses();
  const auto& lines = net.lines();
  const auto& gens = net.generators();
  const bool binary = fixed == nullptr;
  auto switch_bounds = [&](const std::vector<int>* values) {
    return [=](std::size_t i) -> std::pair<double, double> {
      if (values == nullptr) return {0.0, 1.0};
      const double v = (*values)[i];
      return {v, v};
    };
  };

  alloc.fill(vm.z_bus, "z_bus", buses.size(), switch_bounds(fixed ? &fixed->bus : nullptr), binary);
  alloc.fill(vm.z_line, "z_line", lines.size(), switch_bounds(fixed ? &fixed->line : nullptr),
             binary);
  alloc.fill(vm.z_gen, "z_gen", gens.size(), switch_bounds(fixed ? &fixed->gen : nullptr), binary);
  alloc.fill(vm.x_load, "x_load", net.loads().size(),
             [](std::size_t) { return std::pair{0.0, 1.0}; });

  alloc.fill(vm.p_gen, "P_gen", gens.size(), [&](std::size_t g) {
    return std::pair{std::min(0.0, gens[g].pmin), std::max(0.0, gens[g].pmax)};
  });
  auto flow_bounds = [&](std::size_t l) { return std::pair{-lines[l].rate, lines[l].rate}; };
  alloc.fill(vm.p_fr, "P_fr", lines.size(), flow_bounds);

  if (!uses_ac_variables(kind)) {
    double theta_max = 0.0;
    for (const Line& line : lines) theta_max += std::max(std::abs(line.angmin), std::abs(line.angmax));
    alloc.fill(vm.theta, "theta", buses.size(),
               [&](std::size_t) { return std::pair{-theta_max, theta_max}; });
    return vm;
  }

  alloc.fill(vm.x_shunt, "x_shunt", net.shunts().size(),
             [](std::size_t) { return std::pair{0.0, 1.0}; });
  alloc.fill(vm.q_gen, "Q_gen", gens.size(), [&](std::size_t g) {
    return std::pair{std::min(0.0, gens[g].qmin), std::max(0.0, gens[g].qmax)};
  });
  alloc.fill(vm.p_to, "P_to", lines.size(), flow_bounds);
  alloc.fill(vm.q_fr, "Q_fr", lines.size(), flow_bounds);
  alloc.fill(vm.q_to, "Q_to", lines.size(), flow_bounds);
  alloc.fill(vm.w_bus, "W_bus", buses.size(),
             [&](std::size_t i) { return std::pair{0.0, square(buses[i].vmax)}; });
  alloc.fill(vm.w_fr, "W_fr", lines.size(),
             [&](std::size_t l) { return std::pair{0.0, bounds[l].wfr_hi}; });
  alloc.fill(vm.w_to, "W_to", lines.size(),
             [&](std::size_t l) { return std::pair{0.0, bounds[l].wto_hi}; });
  alloc.fill(vm.w_re, "W_R", lines.size(), [&](std::size_t l) {
    return std::pair{std::min(0.0, bounds[l].wr_lo), std::max(0.0, bounds[l].wr_hi)};
  });
  alloc.fill(vm.w_im, "W_I", lines.size(), [&](std::size_t l) {
    return std::pair{std::min(0.0, bounds[l].wi_lo), std::max(0.0, bounds[l].wi_hi)};
  });
  alloc.fill(vm.w_shunt, "W_S", net.shunts().size(), [&](std::size_t s) {
    return std::pair{0.0, square(buses[net.shunts()[s].bus].vmax)};
  });

  if (uses_thermal_y(kind)) {
    auto y_bounds = [&](std::size_t l) { return std::pair{0.0, square(lines[l].rate)}; };
    alloc.fill(vm.yp_fr, "yP_fr", lines.size(), y_bounds);
    alloc.fill(vm.yq_fr, "yQ_fr", lines.size(), y_bounds);
    alloc.fill(vm.yp_to, "yP_to", lines.size(), y_bounds);
    alloc.fill(vm.yq_to, "yQ_to", lines.size(), y_bounds);
  }
  if (uses_voltage_y(kind)) {
    alloc.fill(vm.y_re, "yWR", lines.size(), [&](std::size_t l) {
      return std::pair{0.0, std::max(square(bounds[l].wr_lo), square(bounds[l].wr_hi))};
    });
    alloc.fill(vm.y_im, "yWI", lines.size(), [&](std::size_t l) {
      return std::pair{0.0, std::max(square(bounds[l].wi_lo), square(bounds[l].wi_hi))};
    });
  }
  if (kind == FormulationKind::kSocOpsS) {
    alloc.fill(vm.y_sum, "yWSum", lines.size(), [&](std::size_t l) {
      const double d_lo = bounds[l].wto_lo - bounds[l].wfr_hi;
      const double d_hi = bounds[l].wto_hi - bounds[l].wfr_lo;
      return std::pair{0.0, 0.25 * std::max(square(d_lo), square(d_hi))};
    });
  }
  return vm;
}

double checked_total_demand(const Network& net) {
  const double total = net.total_weighted_demand();
  if (!(total > 0.0)) throw BuildError("total weighted demand must be positive");
  return total;
}

std::vector<double> scenario_risk(const Network& net, const RiskScenario& scenario) {
  if (scenario.risk.empty()) {
    std::vector<double> risk;
    for (const Line& line : net.lines()) risk.push_back(line.risk);
    return risk;
  }
  if (scenario.risk.size() != net.lines().size()) {
    throw BuildError("risk scenario does not match the number of lines");
  }
  return scenario.risk;
}

std::vector<double> load_objective(const Network& net, const VariableMap& vmap, int num_columns) {
  std::vector<double> c(num_columns, 0.0);
  const double total = checked_total_demand(net);
  for (std::size_t d = 0; d < net.loads().size(); ++d) {
    const Load& load = net.loads()[d];
    c[vmap.x_load[d]] = load.weight * load.pd / total;
  }
  return c;
}

std::vector<LinearRow> dc_rows(const Network& net, const VariableMap& vm) {
  std::vector<LinearRow> rows;
  const auto& buses = net.buses();
  const auto& lines = net.lines();
  for (std::size_t i = 0; i < buses.size(); ++i) {
    std::vector<Term> terms;
    for (int g : buses[i].generators) terms.push_back({vm.p_gen[g], 1.0});
    for (int l : buses[i].lines) {
      terms.push_back({vm.p_fr[l], lines[l].from_bus == static_cast<int>(i) ? -1.0 : 1.0});
    }
    for (int d : buses[i].loads) terms.push_back({vm.x_load[d], -net.loads()[d].pd});
    rows.push_back(row(indexed("dc_balance", i), std::move(terms), RowSense::kEqual, 0.0));
  }
  const double theta_max = vm.theta.empty() ? 0.0 : [&] {
    double t = 0.0;
    for (const Line& line : lines) t += std::max(std::abs(line.angmin), std::abs(line.angmax));
    return t;
  }();
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const Line& line = lines[l];
    const int p = vm.p_fr[l], z = vm.z_line[l];
    const int ti = vm.theta[line.from_bus], tj = vm.theta[line.to_bus];
    // Flow equation relaxed by the largest possible angle-difference term.
    const double big_m = 2.0 * std::abs(line.b) * theta_max;
    rows.push_back(row(indexed("dc_flow_hi", l),
                       {{p, 1.0}, {ti, line.b}, {tj, -line.b}, {z, big_m}}, RowSense::kLessEqual,
                       big_m));
    rows.push_back(row(indexed("dc_flow_lo", l),
                       {{p, 1.0}, {ti, line.b}, {tj, -line.b}, {z, -big_m}},
                       RowSense::kGreaterEqual, -big_m));
    rows.push_back(row(indexed("dc_thermal_hi", l), {{p, 1.0}, {z, -line.rate}},
                       RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("dc_thermal_lo", l), {{p, 1.0}, {z, line.rate}},
                       RowSense::kGreaterEqual, 0.0));
    const double angle_m = 2.0 * theta_max + std::max(std::abs(line.angmin), std::abs(line.angmax));
    rows.push_back(row(indexed("dc_angle_hi", l), {{ti, 1.0}, {tj, -1.0}, {z, angle_m}},
                       RowSense::kLessEqual, line.angmax + angle_m));
    rows.push_back(row(indexed("dc_angle_lo", l), {{ti, 1.0}, {tj, -1.0}, {z, -angle_m}},
                       RowSense::kGreaterEqual, line.angmin - angle_m));
  }
  return rows;
}

}  // namespace

const char* to_string(FormulationKind kind) {
  switch (kind) {
    case FormulationKind::kSocOps: return "SOC-OPS";
    case FormulationKind::kSocOpsP: return "SOC-OPS-P";
    case FormulationKind::kSocOpsT: return "SOC-OPS-T";
    case FormulationKind::kSocOpsM: return "SOC-OPS-M";
    case FormulationKind::kSocOpsS: return "SOC-OPS-S";
    case FormulationKind::kDcOps: return "DC-OPS";
    case FormulationKind::kRedispatch: return "REDISPATCH";
  }
  return "unknown";
}

std::optional<FormulationKind> parse_formulation_kind(std::string_view text) {
  std::string key;
  for (char c : text) key.push_back(c == '_' ? '-' : static_cast<char>(std::toupper(c)));
  const std::pair<const char*, FormulationKind> names[] = {
      {"SOC-OPS", FormulationKind::kSocOps},   {"SOC", FormulationKind::kSocOps},
      {"SOC-OPS-P", FormulationKind::kSocOpsP}, {"P", FormulationKind::kSocOpsP},
      {"SOC-OPS-T", FormulationKind::kSocOpsT}, {"T", FormulationKind::kSocOpsT},
      {"SOC-OPS-M", FormulationKind::kSocOpsM}, {"M", FormulationKind::kSocOpsM},
      {"SOC-OPS-S", FormulationKind::kSocOpsS}, {"S", FormulationKind::kSocOpsS},
      {"DC-OPS", FormulationKind::kDcOps},      {"DC", FormulationKind::kDcOps},
      {"REDISPATCH", FormulationKind::kRedispatch},
  };
  for (const auto& [name, kind] : names) {
    if (key == name) return kind;
  }
  return std::nullopt;
}

std::vector<int> VariableMap::all_columns() const {
  std::vector<int> cols(symbols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = static_cast<int>(i);
  return cols;
}

std::vector<LineBounds> derive_bounds(const Network& net) {
  std::vector<LineBounds> out;
  out.reserve(net.lines().size());
  for (const Line& line : net.lines()) {
    if (!(line.angmin > -kHalfPi && line.angmax < kHalfPi)) {
      throw BuildError("line " + std::to_string(line.id) +
                       ": angle limits must lie strictly inside (-90, 90) degrees");
    }
    const Bus& i = net.buses()[line.from_bus];
    const Bus& j = net.buses()[line.to_bus];
    const double widest = std::max(std::abs(line.angmin), std::abs(line.angmax));
    LineBounds b;
    b.wr_hi = i.vmax * j.vmax;
    b.wr_lo = i.vmin * j.vmin * std::cos(widest);
    b.wi_hi = i.vmax * j.vmax * std::sin(line.angmax);
    b.wi_lo = i.vmax * j.vmax * std::sin(line.angmin);
    b.wfr_lo = square(i.vmin);
    b.wfr_hi = square(i.vmax);
    b.wto_lo = square(j.vmin);
    b.wto_hi = square(j.vmax);
    b.secant_lo = 0.5 * (b.wfr_lo + b.wto_lo);
    b.secant_hi = 0.5 * (b.wfr_hi + b.wto_hi);
    out.push_back(b);
  }
  return out;
}

std::vector<double> Linearization::points(double lo, double hi) const {
  if (grid_sizes.empty()) throw BuildError("linearization needs at least one grid");
  if (lo == hi) return {lo};
  std::vector<double> pts;
  for (int n : grid_sizes) {
    auto grid = uniform_points(lo, hi, n);
    pts.insert(pts.end(), grid.begin(), grid.end());
  }
  std::sort(pts.begin(), pts.end());
  const double tol = 1e-12 * std::max(1.0, std::abs(hi - lo));
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [tol](double a, double b) { return std::abs(a - b) <= tol; }),
            pts.end());
  return pts;
}

std::vector<double> build_objective(const Network& net, const RiskScenario& scenario, double alpha,
                                    const VariableMap& vmap, int num_columns) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw BuildError("alpha must lie in [0, 1]");
  const auto risk = scenario_risk(net, scenario);
  double risk_total = 0.0;
  for (double r : risk) risk_total += r;
  if (!(risk_total > 0.0)) throw BuildError("total line risk must be positive");
  auto c = load_objective(net, vmap, num_columns);
  for (double& v : c) v *= (1.0 - alpha);
  for (std::size_t l = 0; l < risk.size(); ++l) c[vmap.z_line[l]] = -alpha * risk[l] / risk_total;
  return c;
}

std::vector<LinearRow> build_energization(const Network& net, const VariableMap& vm) {
  std::vector<LinearRow> rows;
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    rows.push_back(row(indexed("on_gen", g),
                       {{vm.z_gen[g], 1.0}, {vm.z_bus[net.generators()[g].bus], -1.0}},
                       RowSense::kLessEqual, 0.0));
  }
  for (std::size_t l = 0; l < net.lines().size(); ++l) {
    const Line& line = net.lines()[l];
    rows.push_back(row(indexed("on_line_fr", l), {{vm.z_line[l], 1.0}, {vm.z_bus[line.from_bus], -1.0}},
                       RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("on_line_to", l), {{vm.z_line[l], 1.0}, {vm.z_bus[line.to_bus], -1.0}},
                       RowSense::kLessEqual, 0.0));
  }
  for (std::size_t d = 0; d < net.loads().size(); ++d) {
    rows.push_back(row(indexed("on_load", d),
                       {{vm.x_load[d], 1.0}, {vm.z_bus[net.loads()[d].bus], -1.0}},
                       RowSense::kLessEqual, 0.0));
  }
  for (std::size_t s = 0; s < vm.x_shunt.size(); ++s) {
    rows.push_back(row(indexed("on_shunt", s),
                       {{vm.x_shunt[s], 1.0}, {vm.z_bus[net.shunts()[s].bus], -1.0}},
                       RowSense::kLessEqual, 0.0));
  }
  return rows;
}

std::vector<LinearRow> build_generation(const Network& net, const VariableMap& vm) {
  std::vector<LinearRow> rows;
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const Generator& gen = net.generators()[g];
    const int z = vm.z_gen[g];
    rows.push_back(row(indexed("pg_max", g), {{vm.p_gen[g], 1.0}, {z, -gen.pmax}},
                       RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("pg_min", g), {{vm.p_gen[g], 1.0}, {z, -gen.pmin}},
                       RowSense::kGreaterEqual, 0.0));
    if (vm.q_gen.empty()) continue;
    rows.push_back(row(indexed("qg_max", g), {{vm.q_gen[g], 1.0}, {z, -gen.qmax}},
                       RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("qg_min", g), {{vm.q_gen[g], 1.0}, {z, -gen.qmin}},
                       RowSense::kGreaterEqual, 0.0));
  }
  return rows;
}

std::vector<LinearRow> build_power_balance(const Network& net, const VariableMap& vm) {
  std::vector<LinearRow> rows;
  const auto& buses = net.buses();
  const auto& lines = net.lines();
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const Bus& bus = buses[i];
    std::vector<Term> p, q;
    for (int g : bus.generators) {
      p.push_back({vm.p_gen[g], 1.0});
      q.push_back({vm.q_gen[g], 1.0});
    }
    for (int l : bus.lines) {
      const bool from = lines[l].from_bus == static_cast<int>(i);
      p.push_back({from ? vm.p_fr[l] : vm.p_to[l], -1.0});
      q.push_back({from ? vm.q_fr[l] : vm.q_to[l], -1.0});
    }
    for (int d : bus.loads) {
      p.push_back({vm.x_load[d], -net.loads()[d].pd});
      q.push_back({vm.x_load[d], -net.loads()[d].qd});
    }
    for (int s : bus.shunts) {
      p.push_back({vm.w_shunt[s], -net.shunts()[s].gs});
      q.push_back({vm.w_shunt[s], net.shunts()[s].bs});
    }
    rows.push_back(row(indexed("balance_p", i), std::move(p), RowSense::kEqual, 0.0));
    rows.push_back(row(indexed("balance_q", i), std::move(q), RowSense::kEqual, 0.0));
  }
  for (std::size_t s = 0; s < net.shunts().size(); ++s) {
    const Shunt& shunt = net.shunts()[s];
    const double vmax2 = square(buses[shunt.bus].vmax);
    const int ws = vm.w_shunt[s], xs = vm.x_shunt[s], w = vm.w_bus[shunt.bus];
    rows.push_back(row(indexed("shunt_env_nonneg", s), {{ws, 1.0}}, RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("shunt_env_lo", s), {{ws, 1.0}, {xs, -vmax2}, {w, -1.0}},
                       RowSense::kGreaterEqual, -vmax2));
    rows.push_back(row(indexed("shunt_env_bus", s), {{ws, 1.0}, {w, -1.0}}, RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("shunt_env_x", s), {{ws, 1.0}, {xs, -vmax2}}, RowSense::kLessEqual, 0.0));
  }
  return rows;
}

std::vector<LinearRow> build_branch_flow(const Network& net, const VariableMap& vm) {
  std::vector<LinearRow> rows;
  for (std::size_t l = 0; l < net.lines().size(); ++l) {
    const Line& line = net.lines()[l];
    const double tr = line.tap.real(), ti = line.tap.imag();
    const double t2 = tr * tr + ti * ti;
    if (!(t2 > 0.0)) throw BuildError("line " + std::to_string(line.id) + ": zero tap ratio");
    const double g = line.g, b = line.b;
    const int fr = vm.w_fr[l], to = vm.w_to[l], wr = vm.w_re[l], wi = vm.w_im[l];
    rows.push_back(row(indexed("flow_p_fr", l),
                       {{vm.p_fr[l], 1.0},
                        {fr, -(g + line.g_fr) / t2},
                        {wr, -(-g * tr + b * ti) / t2},
                        {wi, -(-b * tr - g * ti) / t2}},
                       RowSense::kEqual, 0.0));
    // Seen from the to side the product is conj(W^R + jW^I), so W^I flips sign.
    rows.push_back(row(indexed("flow_p_to", l),
                       {{vm.p_to[l], 1.0},
                        {to, -(g + line.g_to)},
                        {wr, -(-g * tr - b * ti) / t2},
                        {wi, -(b * tr - g * ti) / t2}},
                       RowSense::kEqual, 0.0));
    rows.push_back(row(indexed("flow_q_fr", l),
                       {{vm.q_fr[l], 1.0},
                        {fr, (b + line.b_fr) / t2},
                        {wr, (-b * tr - g * ti) / t2},
                        {wi, -(-g * tr + b * ti) / t2}},
                       RowSense::kEqual, 0.0));
    rows.push_back(row(indexed("flow_q_to", l),
                       {{vm.q_to[l], 1.0},
                        {to, b + line.b_to},
                        {wr, (-b * tr + g * ti) / t2},
                        {wi, -(g * tr + b * ti) / t2}},
                       RowSense::kEqual, 0.0));
  }
  return rows;
}

ConicBlock build_voltage_block(const Network& net, const VariableMap& vm, FormulationKind kind) {
  const auto bounds = derive_bounds(net);
  ConicBlock out;
  auto& rows = out.rows;
  const auto& buses = net.buses();
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const int w = vm.w_bus[i], z = vm.z_bus[i];
    rows.push_back(row(indexed("w_bus_lo", i), {{w, 1.0}, {z, -square(buses[i].vmin)}},
                       RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("w_bus_hi", i), {{w, 1.0}, {z, -square(buses[i].vmax)}},
                       RowSense::kLessEqual, 0.0));
  }
  for (std::size_t l = 0; l < net.lines().size(); ++l) {
    const Line& line = net.lines()[l];
    const LineBounds& b = bounds[l];
    const int z = vm.z_line[l], fr = vm.w_fr[l], to = vm.w_to[l], wr = vm.w_re[l], wi = vm.w_im[l];
    const int wii = vm.w_bus[line.from_bus], wjj = vm.w_bus[line.to_bus];
    const double vi2 = b.wfr_hi, vj2 = b.wto_hi;

    rows.push_back(row(indexed("w_fr_lo", l), {{fr, 1.0}, {z, -b.wfr_lo}}, RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("w_fr_hi", l), {{fr, 1.0}, {z, -b.wfr_hi}}, RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("w_to_lo", l), {{to, 1.0}, {z, -b.wto_lo}}, RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("w_to_hi", l), {{to, 1.0}, {z, -b.wto_hi}}, RowSense::kLessEqual, 0.0));

    rows.push_back(row(indexed("link_fr_hi", l), {{fr, 1.0}, {wii, -1.0}}, RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("link_fr_lo", l), {{fr, 1.0}, {wii, -1.0}, {z, -vi2}},
                       RowSense::kGreaterEqual, -vi2));
    rows.push_back(row(indexed("link_to_hi", l), {{to, 1.0}, {wjj, -1.0}}, RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("link_to_lo", l), {{to, 1.0}, {wjj, -1.0}, {z, -vj2}},
                       RowSense::kGreaterEqual, -vj2));

    rows.push_back(row(indexed("w_re_lo", l), {{wr, 1.0}, {z, -b.wr_lo}}, RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("w_re_hi", l), {{wr, 1.0}, {z, -b.wr_hi}}, RowSense::kLessEqual, 0.0));
    rows.push_back(row(indexed("w_im_lo", l), {{wi, 1.0}, {z, -b.wi_lo}}, RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("w_im_hi", l), {{wi, 1.0}, {z, -b.wi_hi}}, RowSense::kLessEqual, 0.0));

    rows.push_back(row(indexed("angle_lo", l), {{wi, 1.0}, {wr, -std::tan(line.angmin)}},
                       RowSense::kGreaterEqual, 0.0));
    rows.push_back(row(indexed("angle_hi", l), {{wi, 1.0}, {wr, -std::tan(line.angmax)}},
                       RowSense::kLessEqual, 0.0));

    const std::vector<Term> lhs{{wr, 1.0}, {wi, 1.0}};
    switch (kind) {
      case FormulationKind::kSocOps:
        out.cones.push_back({indexed("vcone_bus", l), lhs, {wii, 1.0}, {wjj, 1.0}});
        out.cones.push_back({indexed("vcone_fr", l), lhs, {wii, vj2}, {z, 1.0}});
        out.cones.push_back({indexed("vcone_to", l), lhs, {wjj, vi2}, {z, 1.0}});
        break;
      case FormulationKind::kSocOpsP:
      case FormulationKind::kSocOpsT:
      case FormulationKind::kRedispatch:
        out.cones.push_back({indexed("vcone", l), lhs, {fr, 1.0}, {to, 1.0}});
        break;
      default:
        break;
    }
  }
  return out;
}

std::vector<RotatedCone> build_thermal_cones(const Network& net, const VariableMap& vm) {
  std::vector<RotatedCone> cones;
  for (std::size_t l = 0; l < net.lines().size(); ++l) {
    const double t = net.lines()[l].rate;
    const int z = vm.z_line[l];
    cones.push_back({indexed("thermal_fr", l), {{vm.p_fr[l], 1.0}, {vm.q_fr[l], 1.0}}, {z, t}, {z, t}});
    cones.push_back({indexed("thermal_to", l), {{vm.p_to[l], 1.0}, {vm.q_to[l], 1.0}}, {z, t}, {z, t}});
  }
  return cones;
}

namespace {

// Rows shared by every AC kind: switching, generation, balance, flow and the
// voltage block.
void add_ac_core(const Network& net, const VariableMap& vm, FormulationKind kind,
                 ConicMipInstance& inst) {
  inst.add_rows(build_energization(net, vm));
  inst.add_rows(build_generation(net, vm));
  inst.add_rows(build_power_balance(net, vm));
  inst.add_rows(build_branch_flow(net, vm));
  auto voltage = build_voltage_block(net, vm, kind);
  inst.add_rows(std::move(voltage.rows));
  inst.add_cones(std::move(voltage.cones));
}

}  // namespace

Formulation build_formulation(const Network& net, const RiskScenario& scenario, double alpha,
                              FormulationKind kind, const Linearization& lin) {
  if (kind == FormulationKind::kRedispatch) {
    throw BuildError("redispatch models are built from a fixed topology");
  }
  if (kind == FormulationKind::kDcOps) return build_dc_ops(net, scenario, alpha);

  Formulation f;
  f.kind = kind;
  auto& inst = f.instance;
  inst.name = net.name() + "/" + to_string(kind);
  inst.sense = ObjectiveSense::kMaximize;
  const auto bounds = derive_bounds(net);
  f.vmap = allocate(net, kind, inst, bounds);
  inst.objective = build_objective(net, scenario, alpha, f.vmap, inst.num_columns());
  add_ac_core(net, f.vmap, kind, inst);

  switch (kind) {
    case FormulationKind::kSocOps:
    case FormulationKind::kSocOpsP:
      inst.add_cones(build_thermal_cones(net, f.vmap));
      break;
    case FormulationKind::kSocOpsT:
      inst.add_rows(thermal_linearization(net, f.vmap, lin));
      break;
    case FormulationKind::kSocOpsM:
      inst.add_rows(thermal_linearization(net, f.vmap, lin));
      inst.add_rows(voltage_quadratic_cuts(net, f.vmap, lin));
      inst.add_rows(mccormick_voltage(net, f.vmap));
      break;
    case FormulationKind::kSocOpsS:
      inst.add_rows(thermal_linearization(net, f.vmap, lin));
      inst.add_rows(voltage_quadratic_cuts(net, f.vmap, lin));
      inst.add_rows(secant_voltage(net, f.vmap, lin));
      break;
    default:
      break;
  }
  return f;
}

Formulation build_formulation(const Network& net, const RiskScenario& scenario, double alpha,
                              FormulationKind kind, int lin_points) {
  return build_formulation(net, scenario, alpha, kind, Linearization::uniform(lin_points));
}

Formulation build_dc_ops(const Network& net, const RiskScenario& scenario, double alpha) {
  Formulation f;
  f.kind = FormulationKind::kDcOps;
  auto& inst = f.instance;
  inst.name = net.name() + "/DC-OPS";
  inst.sense = ObjectiveSense::kMaximize;
  f.vmap = allocate(net, FormulationKind::kDcOps, inst, {});
  inst.objective = build_objective(net, scenario, alpha, f.vmap, inst.num_columns());
  inst.add_rows(build_energization(net, f.vmap));
  inst.add_rows(build_generation(net, f.vmap));
  inst.add_rows(dc_rows(net, f.vmap));
  return f;
}

Topology Topology::all_on(const Network& net) {
  return Topology{std::vector<int>(net.buses().size(), 1), std::vector<int>(net.lines().size(), 1),
                  std::vector<int>(net.generators().size(), 1)};
}

Topology extract_topology(const Network& net, const VariableMap& vmap, std::span<const double> x,
                          double tol) {
  auto read = [&](const std::vector<int>& cols, const char* what) {
    std::vector<int> out;
    out.reserve(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double v = x[cols[k]];
      if (std::abs(v) <= tol) {
        out.push_back(0);
      } else if (std::abs(v - 1.0) <= tol) {
        out.push_back(1);
      } else {
        throw InputError(std::string("fractional ") + what + " switch " + std::to_string(k) + ": " +
                         std::to_string(v));
      }
    }
    return out;
  };
  Topology t{read(vmap.z_bus, "bus"), read(vmap.z_line, "line"), read(vmap.z_gen, "generator")};
  if (t.bus.size() != net.buses().size() || t.line.size() != net.lines().size() ||
      t.gen.size() != net.generators().size()) {
    throw InputError("variable map does not match the network");
  }
  return t;
}

void check_topology(const Network& net, const Topology& t) {
  if (t.bus.size() != net.buses().size() || t.line.size() != net.lines().size() ||
      t.gen.size() != net.generators().size()) {
    throw InputError("topology does not match the network");
  }
  auto binary = [](int v) { return v == 0 || v == 1; };
  for (std::size_t i = 0; i < t.bus.size(); ++i) {
    if (!binary(t.bus[i])) throw InputError("bus switch values must be 0 or 1");
  }
  for (std::size_t l = 0; l < t.line.size(); ++l) {
    const Line& line = net.lines()[l];
    if (!binary(t.line[l])) throw InputError("line switch values must be 0 or 1");
    if (t.line[l] > t.bus[line.from_bus] || t.line[l] > t.bus[line.to_bus]) {
      throw InputError("line " + std::to_string(line.id) + " is on but an end bus is off");
    }
  }
  for (std::size_t g = 0; g < t.gen.size(); ++g) {
    if (!binary(t.gen[g])) throw InputError("generator switch values must be 0 or 1");
    if (t.gen[g] > t.bus[net.generators()[g].bus]) {
      throw InputError("generator " + std::to_string(net.generators()[g].id) +
                       " is on but its bus is off");
    }
  }
}

Formulation build_redispatch(const Network& net, const Topology& topology) {
  check_topology(net, topology);
  Formulation f;
  f.kind = FormulationKind::kRedispatch;
  auto& inst = f.instance;
  inst.name = net.name() + "/REDISPATCH";
  inst.sense = ObjectiveSense::kMaximize;
  const auto bounds = derive_bounds(net);
  f.vmap = allocate(net, FormulationKind::kRedispatch, inst, bounds, &topology);
  inst.objective = load_objective(net, f.vmap, inst.num_columns());
  add_ac_core(net, f.vmap, FormulationKind::kRedispatch, inst);
  inst.add_cones(build_thermal_cones(net, f.vmap));
  return f;
}

double load_term(const Network& net, const VariableMap& vmap, std::span<const double> x) {
  const double total = checked_total_demand(net);
  double delivered = 0.0;
  for (std::size_t d = 0; d < net.loads().size(); ++d) {
    const Load& load = net.loads()[d];
    delivered += load.weight * load.pd * x[vmap.x_load[d]];
  }
  return delivered / total;
}

}  // namespace gridshed
