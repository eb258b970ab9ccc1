#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcf/barriers.hpp"
#include "mcf/continuation.hpp"
#include "mcf/error.hpp"
#include "mcf/io.hpp"
#include "mcf/params.hpp"

namespace mcf {

// Fixed barrier constants used instead of the search.
struct BarrierOverrides {
  double M = 64.0, B = 8.0, Rstar = 888.0, taustar = -17.0, D = 1336.0, zeta = 0.125;
  std::optional<double> tau_delta;       // found by the matching scan when absent
  std::optional<double> tau_delta_half;  // same, for delta0/2

  bool operator==(const BarrierOverrides&) const = default;
};

struct BarrierConfig {
  std::optional<BarrierOverrides> constants;  // empty: search
  double delta0 = 0.5;  // with search: upper bound for delta0; with overrides: delta0 itself
  double epsilon = 0.1;  // glue half-width scale
  GridSpec grid;

  bool operator==(const BarrierConfig&) const = default;
};

struct MeshConfig {
  MeshSpec spec;
  long nodes = 0;  // upper bound on the node count of any run mesh; 0 means none

  bool operator==(const MeshConfig&) const = default;
};

struct TimeConfig {
  double s0 = 0.0;
  int n_runs = 4;
  double t_end = 0.0;
  StepControl control{1e-4};

  bool operator==(const TimeConfig&) const = default;
};

// Cadence, inner window and acceptance tolerances of the run monitors.
struct MonitorConfig {
  double cadence = 0.25;        // spacing of record times in log t
  double Z = 5.0;
  double ux_tol = 1e-6;
  double abort_margin = 10.0;   // run aborts below -abort_margin (1 + trunc)
  double margin_factor = 5.0;   // sandwich criterion: margin >= -margin_factor * trunc
  double band_factor = 2.0;     // refinement band for sup|H| and Lambda
  double slope_tol = 0.1;       // relative tolerance on the |A| slope -k/3
  double inner_max = 0.05;      // bound on the inner-convergence error

  bool operator==(const MonitorConfig&) const = default;
};

struct RunConfig {
  ModelParams model;
  BarrierConfig barriers;
  MeshConfig mesh;
  TimeConfig time;
  MonitorConfig monitors;

  bool operator==(const RunConfig&) const = default;

  ContinuationConfig continuation() const {
    ContinuationConfig c;
    c.mesh = mesh.spec;
    c.control = time.control;
    c.epsilon = barriers.epsilon;
    c.s0 = time.s0;
    c.t_end = time.t_end;
    c.n_runs = time.n_runs;
    c.record_dtau = monitors.cadence;
    c.Z = monitors.Z;
    c.abort_margin = monitors.abort_margin;
    c.ux_tol = monitors.ux_tol;
    return c;
  }
};

namespace detail {

// Collects every schema violation with its field path before failing.
class ConfigReader {
 public:
  std::vector<std::string> errors;

  using Handler = std::function<void(const json&, const std::string&)>;
  struct Field {
    const char* key;
    Handler read;
  };

  void section(const json& root, const std::string& name, const std::vector<Field>& fields) {
    if (!root.contains(name)) return;
    object(root.at(name), name, fields);
  }

  void object(const json& obj, const std::string& path, const std::vector<Field>& fields) {
    if (!obj.is_object()) {
      errors.push_back(path + ": expected an object");
      return;
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const Field* f = nullptr;
      for (const auto& c : fields)
        if (it.key() == c.key) f = &c;
      if (!f)
        errors.push_back(path + "." + it.key() + ": unknown key");
      else
        f->read(it.value(), path + "." + it.key());
    }
  }

  Handler real(double& dst, std::function<bool(double)> ok, std::string range) {
    return [this, &dst, ok, range](const json& v, const std::string& path) {
      if (!v.is_number()) {
        errors.push_back(path + ": expected a number");
        return;
      }
      const double x = v.get<double>();
      if (!std::isfinite(x) || !ok(x)) {
        errors.push_back(path + " = " + fmt17(x) + ": must be " + range);
        return;
      }
      dst = x;
    };
  }

  template <class Int>
  Handler integer(Int& dst, long lo, long hi) {
    return [this, &dst, lo, hi](const json& v, const std::string& path) {
      if (!v.is_number() || (v.is_number_float() && std::floor(v.get<double>()) != v.get<double>())) {
        errors.push_back(path + ": expected an integer");
        return;
      }
      const double x = v.get<double>();
      if (x < static_cast<double>(lo) || x > static_cast<double>(hi)) {
        errors.push_back(path + " = " + fmt17(x) + ": must be an integer in [" + std::to_string(lo) + "," +
                         std::to_string(hi) + "]");
        return;
      }
      dst = static_cast<Int>(x);
    };
  }
};

inline bool positive(double x) { return x > 0.0; }
inline bool nonneg(double x) { return x >= 0.0; }

}  // namespace detail

// Validates a parsed document; every violation is listed in the ConfigError message.
inline RunConfig config_from_json(const json& root) {
  using detail::nonneg;
  using detail::positive;
  RunConfig c;
  detail::ConfigReader rd;
  if (!root.is_object()) fail(ErrorKind::ConfigError, "top level must be an object");
  const std::vector<std::string> sections{"model", "barriers", "mesh", "time", "monitors"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (std::find(sections.begin(), sections.end(), it.key()) == sections.end())
      rd.errors.push_back(it.key() + ": unknown section");

  rd.section(root, "model",
             {{"k", rd.integer(c.model.k, 4, 15)},
              {"K0", rd.real(c.model.K0, positive, "positive")},
              {"p", rd.real(c.model.p, [](double x) { return x > 2.0 && x < 3.0; }, "in the open interval (2,3)")},
              {"m", rd.real(c.model.m, [](double x) { return x > 2.0 && x < 3.0; }, "in the open interval (2,3)")}});

  auto& bc = c.barriers;
  BarrierOverrides ov;
  bool has_ov = false;
  std::optional<double> td, tdh;
  double td_v = 0.0, tdh_v = 0.0;
  bool td_set = false, tdh_set = false;
  const std::vector<detail::ConfigReader::Field> ov_fields{
      {"M", rd.real(ov.M, [](double x) { return x > 1.0; }, "greater than 1")},
      {"B", rd.real(ov.B, positive, "positive")},
      {"Rstar", rd.real(ov.Rstar, positive, "positive")},
      {"taustar", rd.real(ov.taustar, [](double x) { return x <= 0.0; }, "nonpositive")},
      {"D", rd.real(ov.D, positive, "positive")},
      {"zeta", rd.real(ov.zeta, positive, "positive")},
      {"tau_delta",
       [&](const json& v, const std::string& path) {
         td_set = true;
         rd.real(td_v, [](double x) { return x < 0.0; }, "negative")(v, path);
       }},
      {"tau_delta_half", [&](const json& v, const std::string& path) {
         tdh_set = true;
         rd.real(tdh_v, [](double x) { return x < 0.0; }, "negative")(v, path);
       }}};
  std::vector<int> samples;
  rd.section(root, "barriers",
             {{"constants",
               [&](const json& v, const std::string& path) {
                 if (v.is_string()) {
                   if (v.get<std::string>() != "search") rd.errors.push_back(path + ": expected \"search\" or an object");
                   return;
                 }
                 has_ov = true;
                 rd.object(v, path, ov_fields);
                 for (const char* req : {"M", "B", "Rstar", "taustar", "D", "zeta"})
                   if (v.is_object() && !v.contains(req)) rd.errors.push_back(path + "." + req + ": required");
               }},
              {"delta0", rd.real(bc.delta0, [](double x) { return x > 0.0 && x <= 0.5; }, "in (0, 1/2]")},
              {"epsilon", rd.real(bc.epsilon, positive, "positive")},
              {"samples",
               [&](const json& v, const std::string& path) {
                 if (!v.is_array() || v.size() != 2) {
                   rd.errors.push_back(path + ": expected [n1, n2]");
                   return;
                 }
                 rd.integer(bc.grid.n1, 2, 100000)(v[0], path + "[0]");
                 rd.integer(bc.grid.n2, 2, 100000)(v[1], path + "[1]");
               }},
              {"tau_span", rd.real(bc.grid.tau_span, positive, "positive")},
              {"nesting_grid", rd.integer(bc.grid.nest, 2, 100000)}});
  if (has_ov) {
    if (td_set) ov.tau_delta = td_v;
    if (tdh_set) ov.tau_delta_half = tdh_v;
    bc.constants = ov;
  }

  auto& ms = c.mesh.spec;
  rd.section(root, "mesh",
             {{"eta", rd.real(ms.eta, [](double x) { return x > 0.0 && x <= 0.1; }, "in (0, 1/10]")},
              {"xmax", rd.real(ms.xmax, [](double x) { return x >= 1.0; }, "at least 1")},
              {"hmax", rd.real(ms.hmax, positive, "positive")},
              {"growth", rd.real(ms.growth, [](double x) { return x > 0.0 && x <= 0.5; }, "in (0, 1/2]")},
              {"rho", rd.real(ms.rho, positive, "positive")},
              {"nodes", rd.integer(c.mesh.nodes, 0, 100000000)}});

  auto& tc = c.time;
  rd.section(root, "time",
             {{"s0", rd.real(tc.s0, nonneg, "nonnegative (0 selects the largest admissible value)")},
              {"n_runs", rd.integer(tc.n_runs, 1, 16)},
              {"t_end", rd.real(tc.t_end, nonneg, "nonnegative (0 selects t_delta)")},
              {"tol", rd.real(tc.control.tol, positive, "positive")},
              {"dt_rel_max", rd.real(tc.control.dt_rel_max, positive, "positive")},
              {"growth_max", rd.real(tc.control.growth_max, [](double x) { return x > 1.0; }, "greater than 1")},
              {"dt_init_rel", rd.real(tc.control.dt_init_rel, positive, "positive")},
              {"max_steps", rd.integer(tc.control.max_steps, 1, 100000000)}});

  auto& mo = c.monitors;
  rd.section(root, "monitors",
             {{"cadence", rd.real(mo.cadence, positive, "positive")},
              {"Z", rd.real(mo.Z, positive, "positive")},
              {"ux_tol", rd.real(mo.ux_tol, nonneg, "nonnegative")},
              {"abort_margin", rd.real(mo.abort_margin, positive, "positive")},
              {"margin_factor", rd.real(mo.margin_factor, positive, "positive")},
              {"band_factor", rd.real(mo.band_factor, [](double x) { return x >= 1.0; }, "at least 1")},
              {"slope_tol", rd.real(mo.slope_tol, positive, "positive")},
              {"inner_max", rd.real(mo.inner_max, positive, "positive")}});

  if (c.mesh.spec.hmax <= 0.0 || c.mesh.spec.hmax > c.mesh.spec.xmax)
    rd.errors.push_back("mesh.hmax: must not exceed mesh.xmax");
  if (!rd.errors.empty()) {
    std::string msg = std::to_string(rd.errors.size()) + " violation(s)";
    for (const auto& e : rd.errors) msg += "\n  " + e;
    fail(ErrorKind::ConfigError, msg);
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, std::string("not valid JSON: ") + e.what());
  }
  return config_from_json(root);
}

inline RunConfig parse_config(const std::filesystem::path& path) { return parse_config_text(read_text(path)); }

// Full echo with every default filled; parses back to an equal RunConfig.
inline json config_to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"k", c.model.k}, {"K0", c.model.K0}, {"p", c.model.p}, {"m", c.model.m}};
  json b;
  if (c.barriers.constants) {
    const auto& o = *c.barriers.constants;
    json oc = {{"M", o.M}, {"B", o.B}, {"Rstar", o.Rstar}, {"taustar", o.taustar}, {"D", o.D}, {"zeta", o.zeta}};
    if (o.tau_delta) oc["tau_delta"] = *o.tau_delta;
    if (o.tau_delta_half) oc["tau_delta_half"] = *o.tau_delta_half;
    b["constants"] = oc;
  } else {
    b["constants"] = "search";
  }
  b["delta0"] = c.barriers.delta0;
  b["epsilon"] = c.barriers.epsilon;
  b["samples"] = {c.barriers.grid.n1, c.barriers.grid.n2};
  b["tau_span"] = c.barriers.grid.tau_span;
  b["nesting_grid"] = c.barriers.grid.nest;
  j["barriers"] = b;
  const auto& ms = c.mesh.spec;
  j["mesh"] = {{"eta", ms.eta},       {"xmax", ms.xmax}, {"hmax", ms.hmax},
               {"growth", ms.growth}, {"rho", ms.rho},   {"nodes", c.mesh.nodes}};
  const auto& t = c.time;
  j["time"] = {{"s0", t.s0},
               {"n_runs", t.n_runs},
               {"t_end", t.t_end},
               {"tol", t.control.tol},
               {"dt_rel_max", t.control.dt_rel_max},
               {"growth_max", t.control.growth_max},
               {"dt_init_rel", t.control.dt_init_rel},
               {"max_steps", t.control.max_steps}};
  const auto& m = c.monitors;
  j["monitors"] = {{"cadence", m.cadence},
                   {"Z", m.Z},
                   {"ux_tol", m.ux_tol},
                   {"abort_margin", m.abort_margin},
                   {"margin_factor", m.margin_factor},
                   {"band_factor", m.band_factor},
                   {"slope_tol", m.slope_tol},
                   {"inner_max", m.inner_max}};
  return j;
}

}  // namespace mcf
