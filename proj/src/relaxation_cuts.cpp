#include "gridshed/relaxation_cuts.hpp"

#include <algorithm>
#include <cmath>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

std::string indexed(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

LinearRow make_row(std::string name, std::vector<Term> terms, RowSense sense, double rhs) {
  std::erase_if(terms, [](const Term& t) { return t.coef == 0.0; });
  return LinearRow{std::move(name), std::move(terms), sense, rhs};
}

void append(std::vector<LinearRow>& out, std::vector<LinearRow> more) {
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
}

void require(const std::vector<int>& cols, const char* what) {
  if (cols.empty() || std::any_of(cols.begin(), cols.end(), [](int c) { return c < 0; })) {
    throw BuildError(std::string("variable map lacks ") + what);
  }
}

}  // namespace

std::vector<double> uniform_points(double lo, double hi, int n) {
  if (n < 2) throw BuildError("a point grid needs at least two points");
  std::vector<double> pts(n);
  for (int k = 0; k < n; ++k) pts[k] = lo + (hi - lo) * k / (n - 1);
  pts.back() = hi;
  return pts;
}

std::vector<LinearRow> tangent_cuts(int y_col, std::span<const Term> expr, int z_col,
                                    std::span<const double> points, const std::string& name) {
  if (points.empty()) throw BuildError("tangent cuts need at least one point");
  std::vector<LinearRow> rows;
  rows.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double l = points[k];
    std::vector<Term> terms{{y_col, 1.0}};
    for (const Term& t : expr) terms.push_back({t.col, -2.0 * l * t.coef});
    terms.push_back({z_col, l * l});
    rows.push_back(make_row(indexed(name, k), std::move(terms), RowSense::kGreaterEqual, 0.0));
  }
  return rows;
}

std::vector<LinearRow> tangent_cuts(int y_col, int x_col, int z_col, std::span<const double> points,
                                    const std::string& name) {
  const Term expr[] = {{x_col, 1.0}};
  return tangent_cuts(y_col, expr, z_col, points, name);
}

std::vector<LinearRow> thermal_linearization(const Network& net, const VariableMap& vmap,
                                             const Linearization& lin) {
  require(vmap.yp_fr, "thermal y-variables");
  require(vmap.yq_to, "thermal y-variables");
  std::vector<LinearRow> rows;
  const auto& lines = net.lines();
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const double t = lines[l].rate;
    const int z = vmap.z_line[l];
    const auto pts = lin.points(-t, t);
    struct Side {
      const char* tag;
      int yp, yq, p, q;
    };
    const Side sides[] = {{"fr", vmap.yp_fr[l], vmap.yq_fr[l], vmap.p_fr[l], vmap.q_fr[l]},
                          {"to", vmap.yp_to[l], vmap.yq_to[l], vmap.p_to[l], vmap.q_to[l]}};
    for (const Side& s : sides) {
      const std::string tag = std::string(s.tag) + "[" + std::to_string(l) + "]";
      rows.push_back(make_row("thermal_budget_" + tag, {{s.yp, 1.0}, {s.yq, 1.0}, {z, -t * t}},
                              RowSense::kLessEqual, 0.0));
      append(rows, tangent_cuts(s.yp, s.p, z, pts, "thermal_tan_p_" + tag));
      append(rows, tangent_cuts(s.yq, s.q, z, pts, "thermal_tan_q_" + tag));
    }
  }
  return rows;
}

std::vector<LinearRow> voltage_quadratic_cuts(const Network& net, const VariableMap& vmap,
                                              const Linearization& lin) {
  require(vmap.y_re, "voltage y-variables");
  require(vmap.y_im, "voltage y-variables");
  const auto bounds = derive_bounds(net);
  std::vector<LinearRow> rows;
  for (std::size_t l = 0; l < bounds.size(); ++l) {
    const auto& b = bounds[l];
    const int z = vmap.z_line[l];
    append(rows, tangent_cuts(vmap.y_re[l], vmap.w_re[l], z, lin.points(b.wr_lo, b.wr_hi),
                              indexed("wr_tan", l)));
    append(rows, tangent_cuts(vmap.y_im[l], vmap.w_im[l], z, lin.points(b.wi_lo, b.wi_hi),
                              indexed("wi_tan", l)));
  }
  return rows;
}

std::vector<LinearRow> mccormick_voltage(const Network& net, const VariableMap& vmap) {
  require(vmap.y_re, "voltage y-variables");
  const auto bounds = derive_bounds(net);
  std::vector<LinearRow> rows;
  for (std::size_t l = 0; l < bounds.size(); ++l) {
    const auto& b = bounds[l];
    const int yr = vmap.y_re[l], yi = vmap.y_im[l], fr = vmap.w_fr[l], to = vmap.w_to[l];
    const int z = vmap.z_line[l];
    rows.push_back(make_row(indexed("mccormick_a", l),
                            {{yr, 1.0}, {yi, 1.0}, {fr, -b.wto_hi}, {to, -b.wfr_lo},
                             {z, b.wfr_lo * b.wto_hi}},
                            RowSense::kLessEqual, 0.0));
    rows.push_back(make_row(indexed("mccormick_b", l),
                            {{yr, 1.0}, {yi, 1.0}, {fr, -b.wto_lo}, {to, -b.wfr_hi},
                             {z, b.wto_lo * b.wfr_hi}},
                            RowSense::kLessEqual, 0.0));
  }
  return rows;
}

std::vector<LinearRow> secant_voltage(const Network& net, const VariableMap& vmap,
                                      const Linearization& lin) {
  require(vmap.y_sum, "secant y-variables");
  const auto bounds = derive_bounds(net);
  std::vector<LinearRow> rows;
  for (std::size_t l = 0; l < bounds.size(); ++l) {
    const auto& b = bounds[l];
    const int fr = vmap.w_fr[l], to = vmap.w_to[l], z = vmap.z_line[l];
    // Cuts are tangents of ((W^To - W^Fr)/2)^2, so points cover half the
    // range of the difference.
    const double d_lo = b.wto_lo - b.wfr_hi;
    const double d_hi = b.wto_hi - b.wfr_lo;
    const Term half_diff[] = {{to, 0.5}, {fr, -0.5}};
    append(rows, tangent_cuts(vmap.y_sum[l], half_diff, z, lin.points(0.5 * d_lo, 0.5 * d_hi),
                              indexed("wsum_tan", l)));
    const double lo = b.secant_lo, hi = b.secant_hi;
    const double slope = 0.5 * (hi + lo);
    rows.push_back(make_row(indexed("secant", l),
                            {{vmap.y_re[l], 1.0}, {vmap.y_im[l], 1.0}, {vmap.y_sum[l], 1.0},
                             {fr, -slope}, {to, -slope}, {z, lo * hi}},
                            RowSense::kLessEqual, 0.0));
  }
  return rows;
}

double tangent_value(double l, double x, double z) { return 2.0 * l * x - l * l * z; }

double mccormick_upper_1(double fr, double to, double fr_lo, double to_hi, double z) {
  return fr * to_hi + to * fr_lo - fr_lo * to_hi * z;
}

double mccormick_upper_2(double fr, double to, double to_lo, double fr_hi, double z) {
  return fr * to_lo + to * fr_hi - to_lo * fr_hi * z;
}

double secant_value(double s, double lo, double hi, double z) {
  return (hi + lo) * s - lo * hi * z;
}

std::optional<LinearRow> cone_supporting_row(const RotatedCone& cone,
                                             std::span<const double> point) {
  const double a = cone.rhs_a.coef * point[cone.rhs_a.col];
  const double b = cone.rhs_b.coef * point[cone.rhs_b.col];
  double norm2 = (a - b) * (a - b);
  for (const Term& t : cone.lhs) {
    const double u = t.coef * point[t.col];
    norm2 += 4.0 * u * u;
  }
  const double norm = std::sqrt(norm2);
  std::vector<Term> coef;
  auto add = [&coef](int col, double c) {
    for (Term& t : coef) {
      if (t.col == col) {
        t.coef += c;
        return;
      }
    }
    coef.push_back({col, c});
  };
  if (norm == 0.0) {
    if (a + b >= 0.0) return std::nullopt;
    add(cone.rhs_a.col, -cone.rhs_a.coef);
    add(cone.rhs_b.col, -cone.rhs_b.coef);
  } else {
    for (const Term& t : cone.lhs) {
      const double u = t.coef * point[t.col];
      add(t.col, 4.0 * u * t.coef / norm);
    }
    add(cone.rhs_a.col, cone.rhs_a.coef * ((a - b) / norm - 1.0));
    add(cone.rhs_b.col, cone.rhs_b.coef * (-(a - b) / norm - 1.0));
  }
  double scale = 0.0;
  for (const Term& t : coef) scale = std::max(scale, std::abs(t.coef));
  if (scale == 0.0) return std::nullopt;
  std::sort(coef.begin(), coef.end(), [](const Term& x, const Term& y) { return x.col < y.col; });
  LinearRow row;
  row.name = cone.name + "_oa";
  row.sense = RowSense::kLessEqual;
  row.rhs = 0.0;
  for (const Term& t : coef) {
    if (t.coef != 0.0) row.terms.push_back({t.col, t.coef / scale});
  }
  return row;
}

std::optional<LinearRow> lazy_cone_cut(std::span<const double> point, const RotatedCone& cone,
                                       double tol, std::span<const Column> columns) {
  if (cone_violation(cone, point) <= tol) return std::nullopt;

  auto fixed_zero = [&](const Term& t) {
    if (t.coef == 0.0) return true;
    if (columns.empty()) return false;
    const Column& c = columns[t.col];
    return c.lower == 0.0 && c.upper == 0.0;
  };
  if (fixed_zero(cone.rhs_a) || fixed_zero(cone.rhs_b)) {
    int worst = -1;
    double worst_value = 0.0;
    for (const Term& t : cone.lhs) {
      const double v = std::abs(t.coef * point[t.col]);
      if (v > worst_value) {
        worst_value = v;
        worst = t.col;
      }
    }
    if (worst < 0) return std::nullopt;
    return LinearRow{cone.name + "_zero", {{worst, 1.0}}, RowSense::kEqual, 0.0};
  }

  auto row = cone_supporting_row(cone, point);
  if (!row || row->activity(point) <= 0.0) return std::nullopt;
  return row;
}

}  // namespace gridshed
