#include "gridshed/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "gridshed/errors.hpp"

namespace gridshed {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_exact(FormulationKind kind) {
  return kind == FormulationKind::kSocOps || kind == FormulationKind::kSocOpsP;
}

std::string num(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string validate(const ExperimentPlan& plan) {
  if (plan.cases.empty()) return "plan has no cases";
  if (plan.seeds.empty()) return "plan has no seeds";
  if (plan.kinds.empty()) return "plan has no formulation kinds";
  for (FormulationKind k : plan.kinds) {
    if (k == FormulationKind::kRedispatch) return "REDISPATCH is not an OPS formulation";
  }
  if (!(plan.alpha >= 0.0 && plan.alpha <= 1.0)) return "alpha must lie in [0, 1]";
  if (plan.lin_points < 2) return "lin-points must be at least 2";
  if (!(plan.time_limit_s > 0.0)) return "time limit must be positive";
  if (!(plan.gap >= 0.0)) return "gap must be nonnegative";
  if (plan.threads < 1) return "threads must be positive";
  return {};
}

std::filesystem::path bundled_case_dir() {
  if (const char* env = std::getenv("GRIDSHED_CASES"); env != nullptr && *env != '\0') {
    return env;
  }
  return std::filesystem::path(GRIDSHED_DATA_DIR) / "cases";
}

std::filesystem::path resolve_case(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(name_or_path)) return name_or_path;
  const fs::path dir = bundled_case_dir();
  const std::string key = lower(fs::path(name_or_path).stem().string());
  std::vector<fs::path> matches;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".m") continue;
      const std::string stem = lower(entry.path().stem().string());
      if (stem == key) return entry.path();
      // pglib names: pglib_opf_case14_ieee matches "case14".
      const std::string token = "_" + key + "_";
      if (("_" + stem + "_").find(token) != std::string::npos) matches.push_back(entry.path());
    }
  }
  std::sort(matches.begin(), matches.end());
  if (matches.size() == 1) return matches.front();
  if (matches.empty()) throw InputError("no case named '" + name_or_path + "'");
  throw InputError("case name '" + name_or_path + "' is ambiguous");
}

Network load_case(const std::filesystem::path& path, int* sanitized) {
  SanitizeResult s = sanitize_negative_loads(parse_case(path));
  if (sanitized != nullptr) *sanitized = s.modified;
  return std::move(s.network);
}

CellOutcome run_cell(const ExperimentPlan& plan, const CellSpec& cell, const Network& net) {
  CellOutcome out;
  ResultRecord& rec = out.record;
  rec.case_name = net.name();
  rec.seed = cell.seed;
  rec.kind = cell.kind;
  rec.alpha = plan.alpha;
  rec.lin_points = cell.lin_label;
  rec.gap_target = plan.gap;
  rec.feasibility_tol = plan.feasibility_tol;
  rec.integrality_tol = plan.integrality_tol;
  rec.perf_ratio = kNaN;
  rec.bound_ratio = kNaN;
  rec.delivered = kNaN;
  rec.estimated = kNaN;
  try {
    const RiskScenario scenario = generate_risk_scenario(net, cell.seed);
    out.formulation = cell.kind == FormulationKind::kDcOps
                          ? build_dc_ops(net, scenario, plan.alpha)
                          : build_formulation(net, scenario, plan.alpha, cell.kind, cell.lin);
    BnbConfig config;
    config.time_limit_s = plan.time_limit_s;
    config.gap = plan.gap;
    config.feasibility_tol = plan.feasibility_tol;
    config.integrality_tol = plan.integrality_tol;
    OuterApproximationSolver node_solver;
    out.solve = solve(out.formulation.instance, config, node_solver);
    const SolveResult& res = out.solve;
    rec.status = res.status;
    rec.objective = res.has_solution() ? res.objective : kNaN;
    rec.bound = res.best_bound;
    rec.gap = res.has_solution() ? res.gap : kNaN;
    rec.time_s = res.time_s;
    rec.nodes = res.nodes;
    rec.cuts = res.cuts;
    rec.message = res.message;
    if (res.has_solution()) {
      rec.estimated = load_term(net, out.formulation.vmap, res.x);
      if (plan.redispatch) {
        RedispatchOptions options;
        options.config = config;
        options.switch_tol = plan.integrality_tol;
        OuterApproximationSolver redispatch_solver;
        out.redispatch = evaluate(net, cell.seed, cell.kind, res, out.formulation.vmap,
                                  redispatch_solver, options);
        rec.redispatch_feasible = out.redispatch.feasible;
        rec.delivered = out.redispatch.feasible ? out.redispatch.delivered : kNaN;
        rec.perf_ratio = out.redispatch.perf_ratio;
        if (!out.redispatch.feasible) {
          if (!rec.message.empty()) rec.message += "; ";
          rec.message += "redispatch " + out.redispatch.diagnostics;
        }
      }
    }
  } catch (const std::exception& e) {
    rec.status = SolveStatus::kError;
    rec.message = e.what();
  }
  return out;
}

void assign_bound_ratios(std::vector<ResultRecord>& records,
                         const std::vector<ResultRecord>& reference) {
  std::map<std::pair<std::string, std::uint64_t>, double> best;
  auto collect = [&best](const std::vector<ResultRecord>& from) {
    for (const ResultRecord& r : from) {
      if (!is_exact(r.kind) || !r.has_solution() || !std::isfinite(r.bound)) continue;
      const auto key = std::make_pair(r.case_name, r.seed);
      const auto it = best.find(key);
      if (it == best.end() || r.bound < it->second) best[key] = r.bound;
    }
  };
  collect(records);
  std::map<std::pair<std::string, std::uint64_t>, double> fallback;
  std::swap(best, fallback);
  collect(reference);
  std::swap(best, fallback);
  for (ResultRecord& r : records) {
    r.bound_ratio = kNaN;
    if (!r.has_solution()) continue;
    const auto key = std::make_pair(r.case_name, r.seed);
    auto it = best.find(key);
    if (it == best.end()) {
      it = fallback.find(key);
      if (it == fallback.end()) continue;
    }
    if (it->second > 0.0) r.bound_ratio = r.objective / it->second;
  }
}

namespace {

struct Job {
  std::size_t net_index = 0;
  CellSpec spec;
  bool reference = false;
};

std::vector<CellOutcome> run_jobs(const ExperimentPlan& plan, const std::vector<Network>& nets,
                                  const std::vector<Job>& jobs) {
  std::vector<CellOutcome> outcomes(jobs.size());
  std::mutex log_mutex;
  std::atomic<int> done{0};
  parallel_for(static_cast<int>(jobs.size()), effective_threads(plan.threads), [&](int i) {
    const Job& job = jobs[i];
    outcomes[i] = run_cell(plan, job.spec, nets[job.net_index]);
    const int finished = ++done;
    if (plan.log != nullptr) {
      const ResultRecord& r = outcomes[i].record;
      char line[256];
      std::snprintf(line, sizeof line, "[%d/%zu] %s seed %llu %s lin %d: %s obj %s t %.2fs%s\n",
                    finished, jobs.size(), r.case_name.c_str(),
                    static_cast<unsigned long long>(r.seed), to_string(r.kind), r.lin_points,
                    to_string(r.status), num(r.objective).c_str(), r.time_s,
                    job.reference ? " (reference bound)" : "");
      std::lock_guard lock(log_mutex);
      *plan.log << line << std::flush;
    }
  });
  return outcomes;
}

std::vector<Network> load_all(const ExperimentPlan& plan) {
  std::vector<Network> nets;
  for (const auto& path : plan.cases) nets.push_back(load_case(path));
  return nets;
}

bool plan_has_exact(const ExperimentPlan& plan) {
  return std::any_of(plan.kinds.begin(), plan.kinds.end(), is_exact);
}

std::vector<ResultRecord> split_records(std::vector<CellOutcome>& outcomes,
                                        const std::vector<Job>& jobs,
                                        std::vector<ResultRecord>& reference) {
  std::vector<ResultRecord> records;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    (jobs[i].reference ? reference : records).push_back(outcomes[i].record);
  }
  return records;
}

}  // namespace

std::vector<CellOutcome> run_matrix_outcomes(const ExperimentPlan& plan) {
  if (const std::string err = validate(plan); !err.empty()) throw InputError(err);
  const std::vector<Network> nets = load_all(plan);
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < nets.size(); ++c) {
    for (std::uint64_t seed : plan.seeds) {
      for (FormulationKind kind : plan.kinds) {
        jobs.push_back({c, {plan.cases[c], seed, kind, Linearization::uniform(plan.lin_points),
                            plan.lin_points}});
      }
      if (plan.reference_bound && !plan_has_exact(plan)) {
        jobs.push_back({c,
                        {plan.cases[c], seed, FormulationKind::kSocOpsP,
                         Linearization::uniform(plan.lin_points), plan.lin_points},
                        true});
      }
    }
  }
  std::vector<CellOutcome> outcomes = run_jobs(plan, nets, jobs);
  std::vector<ResultRecord> reference;
  std::vector<ResultRecord> records = split_records(outcomes, jobs, reference);
  assign_bound_ratios(records, reference);
  std::vector<CellOutcome> kept;
  std::size_t r = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].reference) continue;
    outcomes[i].record = records[r++];
    kept.push_back(std::move(outcomes[i]));
  }
  if (!plan.out_dir.empty()) write_reports(records, plan.out_dir, "results");
  return kept;
}

std::vector<ResultRecord> run_matrix(const ExperimentPlan& plan) {
  std::vector<ResultRecord> records;
  for (CellOutcome& o : run_matrix_outcomes(plan)) records.push_back(std::move(o.record));
  return records;
}

std::vector<ResultRecord> sweep_linearization(const ExperimentPlan& plan, FormulationKind kind,
                                              const std::vector<int>& counts) {
  if (kind != FormulationKind::kSocOpsM && kind != FormulationKind::kSocOpsS) {
    throw InputError("the linearization sweep applies to SOC-OPS-M and SOC-OPS-S only");
  }
  if (counts.empty()) throw InputError("sweep needs at least one count");
  for (int c : counts) {
    if (c < 2) throw InputError("sweep counts must be at least 2");
  }
  ExperimentPlan checked = plan;
  checked.kinds = {kind};
  if (const std::string err = validate(checked); !err.empty()) throw InputError(err);
  const std::vector<Network> nets = load_all(plan);
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < nets.size(); ++c) {
    for (std::uint64_t seed : plan.seeds) {
      Linearization lin;
      lin.grid_sizes.clear();
      for (int count : counts) {
        lin.grid_sizes.push_back(count);
        jobs.push_back({c, {plan.cases[c], seed, kind, lin, count}});
      }
      if (plan.reference_bound) {
        jobs.push_back({c,
                        {plan.cases[c], seed, FormulationKind::kSocOpsP,
                         Linearization::uniform(plan.lin_points), plan.lin_points},
                        true});
      }
    }
  }
  std::vector<CellOutcome> outcomes = run_jobs(plan, nets, jobs);
  std::vector<ResultRecord> reference;
  std::vector<ResultRecord> records = split_records(outcomes, jobs, reference);
  assign_bound_ratios(records, reference);
  if (!plan.out_dir.empty()) write_reports(records, plan.out_dir, "sweep");
  return records;
}

// ---------------------------------------------------------------------------

std::string to_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const ResultRecord& r : records) {
    os << r.case_name << ',' << r.seed << ',' << to_string(r.kind) << ',' << num(r.alpha) << ','
       << r.lin_points << ',' << to_string(r.status) << ',' << num(r.objective) << ','
       << num(r.bound) << ',' << num(r.gap) << ',' << num(r.time_s) << ',' << r.nodes << ','
       << r.cuts << ',' << (r.redispatch_feasible ? 1 : 0) << ',' << num(r.delivered) << ','
       << num(r.estimated) << ',' << num(r.perf_ratio) << ',' << num(r.bound_ratio) << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const ResultRecord& r) {
  nlohmann::json j;
  j["case"] = r.case_name;
  j["seed"] = r.seed;
  j["kind"] = to_string(r.kind);
  j["alpha"] = r.alpha;
  j["lin_points"] = r.lin_points;
  j["status"] = to_string(r.status);
  j["objective"] = json_num(r.objective);
  j["bound"] = json_num(r.bound);
  j["gap"] = json_num(r.gap);
  j["time_s"] = json_num(r.time_s);
  j["nodes"] = r.nodes;
  j["cuts"] = r.cuts;
  j["redispatch_feasible"] = r.redispatch_feasible;
  j["delivered"] = json_num(r.delivered);
  j["estimated"] = json_num(r.estimated);
  j["perf_ratio"] = json_num(r.perf_ratio);
  j["bound_ratio"] = json_num(r.bound_ratio);
  j["gap_target"] = r.gap_target;
  j["feasibility_tol"] = r.feasibility_tol;
  j["integrality_tol"] = r.integrality_tol;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

nlohmann::json to_json(const std::vector<ResultRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRecord& r : records) arr.push_back(to_json(r));
  return arr;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& records) {
  using Key = std::tuple<std::string, FormulationKind, int>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ResultRecord*>> groups;
  for (const ResultRecord& r : records) {
    const Key key{r.case_name, r.kind, r.lin_points};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const Key& key : order) {
    AggregateRow row;
    std::tie(row.case_name, row.kind, row.lin_points) = key;
    double time = 0.0, bound = 0.0, perf = 0.0;
    int bound_n = 0;
    for (const ResultRecord* r : groups[key]) {
      ++row.runs;
      time += r->time_s;
      if (r->status == SolveStatus::kFeasibleAtLimit) ++row.at_limit;
      if (std::isfinite(r->bound_ratio)) {
        bound += r->bound_ratio;
        ++bound_n;
      }
      if (r->redispatch_feasible && std::isfinite(r->perf_ratio)) {
        perf += r->perf_ratio;
        ++row.feasible;
      }
    }
    row.mean_time_s = time / row.runs;
    row.mean_bound_ratio = bound_n > 0 ? bound / bound_n : kNaN;
    row.mean_perf_ratio = row.feasible > 0 ? perf / row.feasible : kNaN;
    rows.push_back(row);
  }
  return rows;
}

std::string format_time_cell(double seconds, int at_limit) {
  char buf[64];
  if (at_limit > 0) {
    std::snprintf(buf, sizeof buf, "%.2f (%d)", seconds, at_limit);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f", seconds);
  }
  return buf;
}

std::string format_percent(double ratio) {
  if (!std::isfinite(ratio)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * ratio);
  return buf;
}

std::string render_tables(const std::vector<AggregateRow>& rows) {
  // Rows are (case, lin points) pairs, columns are kinds, both in first-seen order.
  using RowKey = std::pair<std::string, int>;
  std::vector<RowKey> row_keys;
  std::vector<FormulationKind> kinds;
  std::map<std::pair<RowKey, FormulationKind>, const AggregateRow*> cell;
  bool several_lins = false;
  for (const AggregateRow& a : rows) {
    const RowKey rk{a.case_name, a.lin_points};
    if (std::find(row_keys.begin(), row_keys.end(), rk) == row_keys.end()) row_keys.push_back(rk);
    if (std::find(kinds.begin(), kinds.end(), a.kind) == kinds.end()) kinds.push_back(a.kind);
    cell[{rk, a.kind}] = &a;
  }
  for (const RowKey& rk : row_keys) {
    if (rk.second != row_keys.front().second) several_lins = true;
  }

  auto table = [&](const std::string& title, auto&& text_of) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{several_lins ? "Case / points" : "Case"};
    for (FormulationKind k : kinds) header.emplace_back(to_string(k));
    grid.push_back(header);
    for (const RowKey& rk : row_keys) {
      std::vector<std::string> line{several_lins ? rk.first + " / " + std::to_string(rk.second)
                                                 : rk.first};
      for (FormulationKind k : kinds) {
        const auto it = cell.find({rk, k});
        line.push_back(it == cell.end() ? "" : text_of(*it->second));
      }
      grid.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : grid) {
      for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    }
    std::ostringstream os;
    os << title << '\n';
    for (std::size_t r = 0; r < grid.size(); ++r) {
      for (std::size_t c = 0; c < grid[r].size(); ++c) {
        const std::string& s = grid[r][c];
        if (c == 0) {
          os << s << std::string(width[c] - s.size(), ' ');
        } else {
          os << "  " << std::string(width[c] - s.size(), ' ') << s;
        }
      }
      os << '\n';
      if (r == 0) {
        std::size_t total = 0;
        for (std::size_t w : width) total += w + 2;
        os << std::string(total - 2, '-') << '\n';
      }
    }
    return os.str();
  };

  std::string out;
  out += table("Average solve time [s] (runs stopped at the time limit)",
               [](const AggregateRow& a) { return format_time_cell(a.mean_time_s, a.at_limit); });
  out += '\n';
  out += table("Objective over best exact bound",
               [](const AggregateRow& a) { return format_percent(a.mean_bound_ratio); });
  out += '\n';
  out += table("Redispatch performance of feasible solutions (feasible count)",
               [](const AggregateRow& a) {
                 return format_percent(a.mean_perf_ratio) + " (" + std::to_string(a.feasible) + ")";
               });
  return out;
}

namespace {

std::string summary_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "case,kind,lin_points,runs,mean_time_s,at_time_limit,mean_bound_ratio,"
        "mean_perf_ratio,redispatch_feasible\n";
  for (const AggregateRow& a : rows) {
    os << a.case_name << ',' << to_string(a.kind) << ',' << a.lin_points << ',' << a.runs << ','
       << num(a.mean_time_s) << ',' << a.at_limit << ',' << num(a.mean_bound_ratio) << ','
       << num(a.mean_perf_ratio) << ',' << a.feasible << '\n';
  }
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

void write_reports(const std::vector<ResultRecord>& records, const std::filesystem::path& dir,
                   const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  const auto rows = aggregate(records);
  write_file(dir / (stem + ".csv"), to_csv(records));
  write_file(dir / (stem + ".json"), to_json(records).dump(2) + "\n");
  write_file(dir / (stem + "_summary.csv"), summary_csv(rows));
  write_file(dir / (stem + ".txt"), render_tables(rows));
}

// ---------------------------------------------------------------------------

void parallel_for(int count, int threads, const std::function<void(int)>& job) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& th : pool) th.join();
}

int effective_threads(int requested) {
  if (const char* env = std::getenv("GRIDSHED_THREADS"); env != nullptr) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1, requested);
}

}  // namespace gridshed
