#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace gridshed {

// Component references (`bus`, `from_bus`, `to_bus`) are dense indices into
// Network::buses(); `id` fields hold the numbering used by the case file.

struct Bus {
  int id = 0;
  double vmin = 0.9;
  double vmax = 1.1;
  std::vector<int> generators;
  std::vector<int> loads;
  std::vector<int> shunts;
  std::vector<int> lines;

  bool operator==(const Bus&) const = default;
};

/// Pi-model branch in per unit. `g_fr/b_fr` and `g_to/b_to` are the charging
/// shunts at each end; the tap sits on the from side.
struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double g = 0.0;
  double b = 0.0;
  double g_fr = 0.0;
  double b_fr = 0.0;
  double g_to = 0.0;
  double b_to = 0.0;
  std::complex<double> tap{1.0, 0.0};
  double rate = 0.0;      // thermal limit T (per-unit MVA)
  double angmin = 0.0;    // radians
  double angmax = 0.0;    // radians
  double risk = 1.0;      // base wildfire risk, replaced by a RiskScenario

  bool operator==(const Line&) const = default;
};

struct Generator {
  int id = 0;
  int bus = 0;
  double pmin = 0.0;
  double pmax = 0.0;
  double qmin = 0.0;
  double qmax = 0.0;

  bool operator==(const Generator&) const = default;
};

struct Load {
  int id = 0;
  int bus = 0;
  double pd = 0.0;
  double qd = 0.0;
  double weight = 1.0;

  bool operator==(const Load&) const = default;
};

struct Shunt {
  int id = 0;
  int bus = 0;
  double gs = 0.0;
  double bs = 0.0;

  bool operator==(const Shunt&) const = default;
};

/// Immutable per-unit grid model. The constructor validates references and
/// bounds and fills the per-bus attachment lists; it throws ValidationError.
class Network {
 public:
  Network(std::string name, double base_mva, std::vector<Bus> buses, std::vector<Line> lines,
          std::vector<Generator> generators, std::vector<Load> loads, std::vector<Shunt> shunts);

  const std::string& name() const { return name_; }
  double base_mva() const { return base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Load>& loads() const { return loads_; }
  const std::vector<Shunt>& shunts() const { return shunts_; }

  /// Sum of w_d * Pd over all loads.
  double total_weighted_demand() const;
  /// Sum of the base line risks.
  double total_risk() const;

  bool operator==(const Network&) const = default;

 private:
  std::string name_;
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  std::vector<Shunt> shunts_;
};

/// Per-line risk values for one wildfire scenario, indexed like Network::lines().
struct RiskScenario {
  std::uint64_t seed = 0;
  std::vector<double> risk;

  double total() const;
  bool operator==(const RiskScenario&) const = default;
};

/// Angle-difference limit used when the case file leaves it open.
inline constexpr double kDefaultAngleLimitDeg = 30.0;

/// Reads a MATPOWER case file (mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch and
/// an optional mpc.shunt table with columns bus, Gs, Bs).
Network parse_case(const std::filesystem::path& path);
Network parse_case_text(const std::string& text, const std::string& name = "case");

struct SanitizeResult {
  Network network;
  int modified = 0;
};

/// Zeroes Pd and Qd of every load with negative real demand.
SanitizeResult sanitize_negative_loads(const Network& net);

/// Draws R_ij i.i.d. uniform on [0, 1) from std::mt19937_64 seeded with
/// `seed`, one draw per line in network order. Each draw keeps the top 53
/// bits of one engine output, so the values are identical on every platform.
RiskScenario generate_risk_scenario(const Network& net, std::uint64_t seed);

/// Copy of `net` whose line risks are replaced by the scenario values.
Network apply_risk(const Network& net, const RiskScenario& scenario);

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

}  // namespace gridshed
