#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcf/alencar.hpp"
#include "mcf/barriers.hpp"
#include "mcf/checks.hpp"
#include "mcf/config.hpp"
#include "mcf/continuation.hpp"
#include "mcf/io.hpp"
#include "mcf/params.hpp"
#include "mcf/special.hpp"

namespace mcf {

namespace fs = std::filesystem;

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> s{"constants", "alencar", "eigen", "gsolve", "checks", "barriers", "evolve", "report"};
  return s;
}

inline std::vector<std::string> stage_dependencies(const std::string& name) {
  if (name == "alencar" || name == "eigen" || name == "gsolve") return {"constants"};
  if (name == "barriers") return {"alencar", "gsolve"};
  if (name == "evolve") return {"barriers"};
  return {};
}

// Stages from the first through `last`.
inline std::vector<std::string> stages_through(const std::string& last) {
  std::vector<std::string> r;
  for (const auto& s : stage_names()) {
    r.push_back(s);
    if (s == last) return r;
  }
  fail(ErrorKind::ConfigError, "unknown stage '" + last + "'");
}

enum class BarrierMode { Auto, Search, Verify };

struct PipelineOptions {
  fs::path out;
  std::vector<std::string> stages = stage_names();
  bool resume = false;
  int threads = 1;
  BarrierMode barrier_mode = BarrierMode::Auto;
  std::optional<fs::path> compare;  // second output root for the determinism check
  bool quiet = false;
};

struct Report {
  json doc;
  std::vector<CriterionResult> criteria;
  int exit_code = 1;
};

// ---------------------------------------------------------------- determinism

// Relative paths of the CSV/JSON outputs under root; stage bookkeeping is excluded.
inline std::vector<std::string> comparable_files(const fs::path& root) {
  std::vector<std::string> r;
  if (!fs::exists(root)) return r;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".json") continue;
    const std::string rel = fs::relative(e.path(), root).generic_string();
    if (rel.rfind("stages/", 0) == 0) continue;
    r.push_back(rel);
  }
  std::sort(r.begin(), r.end());
  return r;
}

// report.json without the parts that legitimately differ between executions.
inline std::string report_fingerprint(const fs::path& p) {
  json j = read_json(p);
  j.erase("timings");
  j.erase("summary");
  if (j.contains("criteria")) {
    json kept = json::array();
    for (const auto& c : j["criteria"])
      if (c.value("id", 0) != 9) kept.push_back(c);
    j["criteria"] = kept;
  }
  return dump17(j);
}

inline CriterionResult compare_outputs(const fs::path& a, const fs::path& b) {
  return timed_criterion(9, "determinism", "two executions of `all` give byte-identical CSV/JSON outputs", 1e9,
                         [&](CriterionResult& r) {
                           const auto fa = comparable_files(a), fb = comparable_files(b);
                           std::vector<std::string> missing, differ;
                           std::set_symmetric_difference(fa.begin(), fa.end(), fb.begin(), fb.end(),
                                                         std::back_inserter(missing));
                           std::size_t compared = 0;
                           for (const auto& f : fa) {
                             if (!std::binary_search(fb.begin(), fb.end(), f)) continue;
                             ++compared;
                             const bool same = f == "report.json"
                                                   ? report_fingerprint(a / f) == report_fingerprint(b / f)
                                                   : read_text(a / f) == read_text(b / f);
                             if (!same) differ.push_back(f);
                           }
                           r.checks.push_back(within("files compared", static_cast<double>(compared), 1.0, 1e18));
                           r.checks.push_back(within("files present on one side only", static_cast<double>(missing.size()), 0.0, 0.0));
                           r.checks.push_back(within("differing files", static_cast<double>(differ.size()), 0.0, 0.0));
                           for (const auto& f : missing) r.note += (r.note.empty() ? "" : "; ") + ("unpaired " + f);
                           for (const auto& f : differ) r.note += (r.note.empty() ? "" : "; ") + ("differs " + f);
                         });
}

// ---------------------------------------------------------------- criterion 6

inline json to_json(const ResidualReport& r) {
  return {{"region", r.region},
          {"sign", r.sign},
          {"samples", r.count()},
          {"fraction_correct_sign", r.fraction_correct_sign},
          {"worst_violation", r.worst_violation},
          {"worst_margin", r.worst_margin},
          {"nbound_fraction", r.nbound_fraction},
          {"positive_fraction", r.positive_fraction},
          {"f2_fraction", r.f2_fraction},
          {"pass", r.pass()}};
}

inline json to_json(const MatchingReport& m) {
  json st = json::array();
  for (const auto& s : m.stations)
    st.push_back({{"name", s.name}, {"tau", s.tau}, {"value", s.value}, {"required_sign", s.required_sign}, {"ok", s.ok}});
  return {{"ok", m.ok},
          {"limit_gap_upper_Y", m.limit_gap_upper_Y},
          {"limit_gap_upper_Y4", m.limit_gap_upper_Y4},
          {"stations", st}};
}

inline json to_json(const BarrierParams& p, double tau_half) {
  return {{"delta0", p.delta}, {"B", p.B},         {"M", p.M},
          {"Rstar", p.Rstar},  {"taustar", p.taustar}, {"D", p.D},
          {"zeta", p.zeta},    {"K2plus", p.K2plus},   {"K2minus", p.K2minus},
          {"epsilon", p.epsilon}, {"tau_delta", p.tau_delta}, {"tau_delta_half", tau_half}};
}

inline BarrierParams barrier_params_from_json(const json& j, double& tau_half) {
  BarrierParams p;
  p.delta = j.at("delta0").get<double>();
  p.B = j.at("B").get<double>();
  p.M = j.at("M").get<double>();
  p.Rstar = j.at("Rstar").get<double>();
  p.taustar = j.at("taustar").get<double>();
  p.D = j.at("D").get<double>();
  p.zeta = j.at("zeta").get<double>();
  p.epsilon = j.at("epsilon").get<double>();
  p.tau_delta = j.at("tau_delta").get<double>();
  tau_half = j.at("tau_delta_half").get<double>();
  return p;
}

inline CriterionResult evaluate_barriers(const json& b, double seconds) {
  CriterionResult r;
  r.id = 6;
  r.name = "barrier certification";
  r.target =
      "all residual sweeps sign-correct at 100% of >= 1e4 samples per region; matching crossings bracketed; nesting "
      "for delta0 and delta0/2 on a 200x200 grid";
  r.runtime_limit = 120.0;
  r.seconds = seconds;
  for (const auto& reg : b.at("regions")) {
    const std::string tag = reg.at("region").get<std::string>() + (reg.at("sign").get<int>() > 0 ? " upper" : " lower");
    r.checks.push_back(within(tag + " samples", reg.at("samples").get<double>(), 1e4, 1e18));
    r.checks.push_back(within(tag + " sign-correct fraction", reg.at("fraction_correct_sign").get<double>(), 1.0, 1.0));
    r.checks.push_back(within(tag + " side conditions", reg.at("pass").get<bool>() ? 1.0 : 0.0, 1.0, 1.0));
  }
  r.checks.push_back(holds("matching for delta0", b.at("matching").at("delta0").at("ok").get<bool>()));
  r.checks.push_back(holds("matching for delta0/2", b.at("matching").at("delta0_half").at("ok").get<bool>()));
  const auto& n = b.at("nesting");
  r.checks.push_back(within("nesting grid size", n.at("grid").get<double>(), 200.0, 1e18));
  r.checks.push_back(within("nesting violations",
                            n.at("intermediate_bad").get<double>() + n.at("inner_bad").get<double>() +
                                n.at("global_bad").get<double>(),
                            0.0, 0.0));
  r.note = "constants from " + b.at("source").get<std::string>();
  r.finish();
  return r;
}

// ---------------------------------------------------------------- criterion 8

// Least-squares slope of log v against log t.
inline double loglog_slope(const std::vector<double>& t, const std::vector<double>& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0 && v[i] > 0.0)) continue;
    const double x = std::log(t[i]), y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline CriterionResult evaluate_family(const fs::path& trace, const RunConfig& cfg, double seconds) {
  CriterionResult r;
  r.id = 8;
  r.name = "continuation runs";
  r.target =
      "margins >= -5 trunc; -tol <= u_x <= C1 + tol; sup|H| within factor 2 across n; slope of sup|A| = -k/3 +- 10%; "
      "Lambda within factor 2 band; inner error monotone and < 0.05";
  r.runtime_limit = 600.0;
  r.seconds = seconds;
  const auto& mo = cfg.monitors;
  const json fam = read_json(trace / "family.json");
  const double mono_tol = fam.at("inner_monotone_tol").get<double>();
  const int k = cfg.model.k;
  const auto& runs = fam.at("runs");
  r.checks.push_back(within("completed runs", static_cast<double>(runs.size()), cfg.time.n_runs, cfg.time.n_runs));

  std::vector<double> supH;
  std::vector<std::map<double, double>> lambda_at;
  for (const auto& run : runs) {
    const int n = run.at("n").get<int>();
    const std::string tag = "run " + std::to_string(n) + " ";
    const fs::path dir = trace / ("run_" + std::to_string(n));
    const CsvTable m = read_csv(dir / "monitors.csv");
    const CsvTable x = read_csv(dir / "monitors_extra.csv");
    const auto t = m.col("t"), lo = m.col("marginLo"), hi = m.col("marginHi"), tr = x.col("trunc");
    const auto minUx = m.col("minUx"), supUx = m.col("supUx"), A = m.col("supA"), iE = m.col("innerErr");
    const auto H = m.col("supH"), L = m.col("lambda");
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i)
      margin = std::min(margin, std::min(lo[i], hi[i]) + mo.margin_factor * tr[i]);
    r.checks.push_back(within(tag + "min margin + 5 trunc", margin, 0.0, std::numeric_limits<double>::infinity()));
    const double C1 = run.at("C1").get<double>();
    r.checks.push_back(within(tag + "min u_x", *std::min_element(minUx.begin(), minUx.end()), -mo.ux_tol,
                              std::numeric_limits<double>::infinity()));
    r.checks.push_back(at_most(tag + "max u_x - C1", *std::max_element(supUx.begin(), supUx.end()) - C1, mo.ux_tol));
    const double kt = k / 3.0;
    r.checks.push_back(near(tag + "slope of sup|A|", loglog_slope(t, A), -kt, mo.slope_tol * kt));
    double rise = 0.0;  // largest increase toward smaller t
    for (std::size_t i = 1; i < iE.size(); ++i) rise = std::max(rise, iE[i - 1] - iE[i]);
    r.checks.push_back(at_most(tag + "inner error increase toward small t", rise, mono_tol));
    r.checks.push_back(at_most(tag + "max inner error", *std::max_element(iE.begin(), iE.end()), mo.inner_max));
    supH.push_back(*std::max_element(H.begin(), H.end()));
    std::map<double, double> la;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (L[i] > 0.0) la[t[i]] = L[i];
    lambda_at.push_back(std::move(la));
  }
  for (std::size_t n = 0; n + 1 < supH.size(); ++n)
    r.checks.push_back(within("sup|H| ratio run " + std::to_string(n) + "/" + std::to_string(n + 1),
                              supH[n] / supH[n + 1], 1.0 / mo.band_factor, mo.band_factor));
  if (!lambda_at.empty()) {
    double band = 1.0;
    std::size_t common = 0;
    for (const auto& [tt, v0] : lambda_at.front()) {
      double lo = v0, hi = v0;
      bool all = true;
      for (const auto& la : lambda_at) {
        const auto it = la.find(tt);
        if (it == la.end()) {
          all = false;
          break;
        }
        lo = std::min(lo, it->second);
        hi = std::max(hi, it->second);
      }
      if (!all) continue;
      ++common;
      band = std::max(band, hi / lo);
    }
    r.checks.push_back(within("common Lambda record times", static_cast<double>(common), 1.0, 1e18));
    r.checks.push_back(within("Lambda band max/min", band, 1.0, mo.band_factor));
  }
  r.finish();
  return r;
}

// ---------------------------------------------------------------- pipeline

class Pipeline {
 public:
  Pipeline(RunConfig cfg, PipelineOptions opt) : cfg_(std::move(cfg)), opt_(std::move(opt)) {
    cfg_digest_ = digest(dump17(config_to_json(cfg_)));
  }

  const RunConfig& config() const { return cfg_; }

  Report run() {
    fs::create_directories(opt_.out);
    for (const auto& name : opt_.stages) run_stage(name);
    Report rep = build_report();
    if (std::find(opt_.stages.begin(), opt_.stages.end(), "report") != opt_.stages.end()) {
      write_json(opt_.out / "report.json", rep.doc);
      write_text(opt_.out / "timings.txt", timings_text(rep));
    }
    return rep;
  }

 private:
  RunConfig cfg_;
  PipelineOptions opt_;
  std::string cfg_digest_;
  std::vector<std::string> files_;  // outputs of the stage in progress
  std::map<std::string, double> criteria_seconds_;

  DerivedConstants dc_;
  std::optional<AlencarProfile> profile_;
  std::shared_ptr<const BarrierContext> ctx_;
  std::optional<BarrierParams> bp_;
  double tau_half_ = 0.0;

  fs::path stage_file(const std::string& name) const { return opt_.out / "stages" / (name + ".json"); }

  std::string mode_tag() const {
    switch (opt_.barrier_mode) {
      case BarrierMode::Search: return "search";
      case BarrierMode::Verify: return "verify";
      default: return "auto";
    }
  }

  // Stage record on disk if it belongs to the current configuration.
  std::optional<json> stage_record(const std::string& name) const {
    const fs::path p = stage_file(name);
    if (!fs::exists(p)) return std::nullopt;
    json j;
    try {
      j = read_json(p);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (j.value("config", std::string()) != cfg_digest_) return std::nullopt;
    return j;
  }

  std::string stage_status(const std::string& name) const {
    const auto j = stage_record(name);
    return j ? j->value("status", std::string("not run")) : std::string("not run");
  }

  bool resumable(const std::string& name) const {
    const auto j = stage_record(name);
    if (!j || j->value("status", std::string()) != "done") return false;
    if (name == "barriers" && opt_.barrier_mode != BarrierMode::Auto && j->value("mode", std::string()) != mode_tag())
      return false;
    for (const auto& [rel, dg] : j->at("files").items()) {
      const fs::path p = opt_.out / rel;
      if (!fs::exists(p) || file_digest(p) != dg.get<std::string>()) return false;
    }
    return true;
  }

  void emit(const std::string& rel, const std::string& text) {
    write_text(opt_.out / rel, text);
    files_.push_back(rel);
  }
  void emit_json(const std::string& rel, const json& j) { emit(rel, dump17(j)); }

  void log(const std::string& s) const {
    if (!opt_.quiet) std::cerr << s << "\n";
  }

  void run_stage(const std::string& name) {
    json rec;
    rec["stage"] = name;
    rec["config"] = cfg_digest_;
    rec["mode"] = mode_tag();
    for (const auto& d : stage_dependencies(name)) {
      const std::string st = stage_status(d);
      if (st != "done") {
        rec["status"] = "blocked";
        rec["note"] = "stage '" + d + "' is " + st;
        rec["seconds"] = 0.0;
        rec["files"] = json::object();
        write_json(stage_file(name), rec);
        log("[" + name + "] blocked: " + rec["note"].get<std::string>());
        return;
      }
    }
    if (opt_.resume && name != "report" && resumable(name)) {
      reload(name);
      log("[" + name + "] resumed");
      return;
    }
    files_.clear();
    criteria_seconds_.clear();
    const auto t0 = std::chrono::steady_clock::now();
    std::string status = "done", note;
    try {
      execute(name);
    } catch (const std::exception& e) {
      status = "failed";
      note = e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec["status"] = status;
    rec["note"] = note;
    rec["seconds"] = sec;
    json files = json::object();
    if (status == "done")
      for (const auto& f : files_) files[f] = file_digest(opt_.out / f);
    rec["files"] = files;
    json cs = json::object();
    for (const auto& [id, s] : criteria_seconds_) cs[id] = s;
    rec["criteria_seconds"] = cs;
    write_json(stage_file(name), rec);
    log("[" + name + "] " + status + (note.empty() ? "" : ": " + note) + " (" + fmt_seconds(sec) + ")");
  }

  static std::string fmt_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f s", s);
    return buf;
  }

  // In-memory state of a stage restored from its outputs.
  void reload(const std::string& name) {
    if (name == "constants") dc_ = derive_constants(cfg_.model);
    if (name == "alencar") profile_ = shoot_alencar();
    if (name == "barriers") bp_ = barrier_params_from_json(read_json(opt_.out / "barrier_constants.json"), tau_half_);
  }

  void execute(const std::string& name) {
    if (name == "constants") return stage_constants();
    if (name == "alencar") return stage_alencar();
    if (name == "eigen") return stage_eigen();
    if (name == "gsolve") return stage_gsolve();
    if (name == "checks") return stage_checks();
    if (name == "barriers") return stage_barriers();
    if (name == "evolve") return stage_evolve();
    if (name == "report") return;
    fail(ErrorKind::ConfigError, "unknown stage '" + name + "'");
  }

  json constants_json() const {
    return {{"k", dc_.k},
            {"K0", cfg_.model.K0},
            {"p", cfg_.model.p},
            {"m", cfg_.model.m},
            {"gamma", dc_.gamma},
            {"double_factorial", dc_.dblfact},
            {"K1", dc_.K1},
            {"K2", dc_.K2}};
  }

  void stage_constants() {
    dc_ = derive_constants(cfg_.model);
    emit_json("constants.json", constants_json());
    emit_json("meta.json", {{"program", "mcflab"}, {"config", config_to_json(cfg_)}, {"derived", constants_json()}});
  }

  void stage_alencar() {
    profile_ = shoot_alencar();
    const auto& pr = *profile_;
    CsvWriter w({"z", "W", "W1", "W2"});
    for (std::size_t i = 0; i < pr.z.size(); ++i) w.row({pr.z[i], pr.W[i], pr.W1[i], pr.W2[i]});
    emit("alencar.csv", w.str());
    emit_json("alencar.json", {{"gamma2", pr.Gamma2},
                               {"gamma3", pr.Gamma3},
                               {"gamma5", pr.Gamma5},
                               {"kstar", pr.Kstar},
                               {"z_max", pr.z_max},
                               {"tol", pr.tol},
                               {"start_sensitivity", pr.start_sensitivity},
                               {"samples", pr.z.size()}});
  }

  void stage_eigen() {
    const EigenfunctionK phi(cfg_.model.k);
    CsvWriter w({"y", "phi", "phi1", "phi2"});
    for (double y : logspace(1e-2, 1e2, 401)) {
      const Jet j = phi.eval(y);
      w.row({y, j.v, j.d1, j.d2});
    }
    emit("eigen.csv", w.str());
  }

  void stage_gsolve() {
    const AuxiliaryG g = solve_g_extrapolated(cfg_.model.k, 1e-3, 100.0, 4000);
    CsvWriter w({"y", "g", "residual"});
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
      const double y = g.grid[i];
      w.row({y, g.values[i], g.operator_residual(y) / AuxiliaryG::forcing(g.k, y)});
    }
    emit("g.csv", w.str());
    emit_json("g.json", {{"k", g.k},
                         {"nodes", g.grid.size()},
                         {"y_min", g.y_min()},
                         {"y_max", g.y_max()},
                         {"residual_norm", g.residual_norm},
                         {"C1", g.C1},
                         {"c2", g.c2},
                         {"c3", g.c3},
                         {"c5", g.c5}});
  }

  void stage_checks() {
    std::vector<CriterionResult> rs{check_eigen_identity(), check_phi4_values(), check_g(cfg_.model.k)};
    if (profile_ && stage_status("alencar") == "done") {
      rs.push_back(check_alencar(*profile_));
      rs.push_back(check_linearized(*profile_));
    } else {
      for (auto [id, nm] : {std::pair{4, "Alencar profile"}, std::pair{5, "linearized operators"}}) {
        CriterionResult b;
        b.id = id;
        b.name = nm;
        b.status = Status::Blocked;
        b.note = "stage 'alencar' is " + stage_status("alencar");
        rs.push_back(b);
      }
    }
    rs.push_back(check_solver());
    json arr = json::array();
    for (const auto& r : rs) {
      arr.push_back(to_json(r));
      criteria_seconds_[std::to_string(r.id)] = r.seconds;
    }
    emit_json("checks.json", {{"criteria", arr}});
  }

  std::shared_ptr<const BarrierContext> context() {
    if (!ctx_) {
      if (!profile_) profile_ = shoot_alencar();
      ctx_ = std::make_shared<const BarrierContext>(cfg_.model, *profile_);
    }
    return ctx_;
  }

  // tau_delta for a parameter set, from the matching scan below min(tau*, 0).
  static double matching_tau(const std::shared_ptr<const BarrierContext>& ctx, BarrierParams p) {
    p.tau_delta = std::min(p.taustar, 0.0);
    const BarrierSet bs(ctx, p);
    const double td = find_tau_delta(bs, std::min(p.tau_delta, bs.tau_star_D()));
    if (std::isnan(td)) fail(ErrorKind::ConstantSearchFailure, "no matching window for delta = " + num(p.delta));
    return td;
  }

  void stage_barriers() {
    const auto ctx = context();
    const auto& bc = cfg_.barriers;
    BarrierParams p;
    std::string source;
    json search_log = json::array();
    std::optional<BarrierOverrides> ov = bc.constants;
    if (opt_.barrier_mode == BarrierMode::Search) ov.reset();
    if (opt_.barrier_mode == BarrierMode::Verify && !ov) {
      const fs::path prev = opt_.out / "barrier_constants.json";
      if (!fs::exists(prev))
        fail(ErrorKind::ConfigError, "barriers verify needs barriers.constants in the config or an earlier search");
      p = barrier_params_from_json(read_json(prev), tau_half_);
      source = "previous search";
    } else if (ov) {
      p.delta = bc.delta0;
      p.B = ov->B;
      p.M = ov->M;
      p.Rstar = ov->Rstar;
      p.taustar = ov->taustar;
      p.D = ov->D;
      p.zeta = ov->zeta;
      p.epsilon = bc.epsilon;
      p.tau_delta = ov->tau_delta ? *ov->tau_delta : matching_tau(ctx, p);
      BarrierParams ph = p;
      ph.delta = 0.5 * p.delta;
      tau_half_ = ov->tau_delta_half ? *ov->tau_delta_half : matching_tau(ctx, ph);
      source = "config";
    } else {
      const SearchResult sr = search_constants(ctx, bc.grid, bc.epsilon, bc.delta0);
      p = sr.params;
      tau_half_ = sr.tau_delta_half;
      for (const auto& l : sr.log.lines) search_log.push_back(l);
      source = "search";
    }
    const BarrierSet a(ctx, p);
    const BarrierSet b = with_delta(a, 0.5 * p.delta, tau_half_);
    bp_ = a.bp;
    const BarrierVerification v = verify_barriers(a, b, bc.grid);

    json cj = to_json(a.bp, tau_half_);
    cj["source"] = source;
    emit_json("barrier_constants.json", cj);

    CsvWriter w({"region", "coord1", "coord2", "residual", "required_sign", "ok"});
    json regions = json::array();
    for (const auto& row : v.res)
      for (const auto& rr : row) {
        regions.push_back(to_json(rr));
        for (const auto& s : rr.samples)
          w.cells({rr.region, fmt17(s.coord1), fmt17(s.coord2), fmt17(s.residual), std::to_string(s.required_sign),
                   s.ok ? "1" : "0"});
      }
    emit("residuals.csv", w.str());
    const auto& n = v.nesting;
    emit_json("barriers.json",
              {{"source", source},
               {"delta0", a.bp.delta},
               {"tau_delta", a.bp.tau_delta},
               {"tau_delta_half", tau_half_},
               {"Ydelta", a.spec.Ydelta},
               {"Zdelta", a.spec.Zdelta},
               {"grid", {{"n1", bc.grid.n1}, {"n2", bc.grid.n2}, {"tau_span", bc.grid.tau_span}}},
               {"regions", regions},
               {"matching", {{"delta0", to_json(v.match_a)}, {"delta0_half", to_json(v.match_b)}}},
               {"nesting",
                {{"grid", bc.grid.nest},
                 {"intermediate_checked", n.intermediate_checked},
                 {"intermediate_bad", n.intermediate_bad},
                 {"inner_checked", n.inner_checked},
                 {"inner_bad", n.inner_bad},
                 {"global_checked", n.global_checked},
                 {"global_bad", n.global_bad},
                 {"ok", n.ok()}}},
               {"search_log", search_log},
               {"ok", v.ok()}});
  }

  static std::string state_name(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "state_%.6e.csv", t);
    return buf;
  }

  void stage_evolve() {
    if (!bp_) fail(ErrorKind::ConfigError, "no barrier constants available");
    const auto ctx = context();
    const BarrierSet base(ctx, *bp_);
    const ContinuationConfig cc = cfg_.continuation();
    const FamilyPlan plan = plan_family(base, cc);
    if (cfg_.mesh.nodes > 0)
      for (double s : plan.s) {
        const std::size_t nn = continuation_mesh(s, ctx->dc.kthird(), cc.mesh).size();
        if (static_cast<long>(nn) > cfg_.mesh.nodes)
          fail(ErrorKind::MeshResolutionError, "mesh for s = " + num(s) + " needs " + std::to_string(nn) +
                                                   " nodes, above mesh.nodes = " + std::to_string(cfg_.mesh.nodes));
      }
    const FamilyResult fr = run_family(base, cc, opt_.threads);

    double wsup = 0.0;
    for (double z : linspace(0.0, cc.Z, 201)) wsup = std::max(wsup, z + normalized_excess(ctx->W, ctx->dc.K2, z).v);
    json runs = json::array();
    for (const auto& tr : fr.runs) {
      const std::string dir = "trace/run_" + std::to_string(tr.n) + "/";
      CsvWriter m({"t", "supH", "supA", "supUx", "minUx", "marginLo", "marginHi", "lambda", "innerErr", "dt"});
      CsvWriter x({"t", "trunc", "c2w", "outerC", "uxAxis", "curvIdentity"});
      for (const auto& r : tr.rec) {
        m.row({r.t, r.supH, r.supA, r.supUx, r.minUx, r.marginLo, r.marginHi, r.lambda, r.innerErr, r.dt});
        x.row({r.t, r.trunc, r.c2w, r.outerC, r.uxAxis, r.curvIdentity});
      }
      emit(dir + "monitors.csv", m.str());
      emit(dir + "monitors_extra.csv", x.str());
      json states = json::array();
      for (const auto& st : tr.checkpoints) {
        const auto q = excess_jets(st, LeftBoundary::Axis);
        CsvWriter w({"x", "u", "ux", "uxx", "H", "A"});
        for (std::size_t i = 0; i < q.size(); ++i) {
          const double xv = st.x(i), u = st.u(i);
          w.row({xv, u, 1.0 + q[i].d1, q[i].d2, mean_curvature(xv, u, q[i]), curvatures(xv, u, q[i]).A()});
        }
        emit(dir + state_name(st.t), w.str());
        states.push_back(state_name(st.t));
      }
      json meta = {{"n", tr.n},
                   {"s", tr.s},
                   {"delta", tr.delta},
                   {"tau_delta", tr.tau_delta},
                   {"t_end", tr.t_end},
                   {"epsilon", tr.epsilon},
                   {"nodes", tr.nodes},
                   {"h_min", tr.h_min},
                   {"C1", tr.C1},
                   {"glueC2", tr.glueC2},
                   {"glueC3", tr.glueC3},
                   {"glue_monotone_min", tr.glue_monotone_min},
                   {"glue_sandwich_min", tr.glue_sandwich_min},
                   {"accepted", tr.accepted},
                   {"rejected", tr.rejected},
                   {"records", tr.rec.size()},
                   {"checkpoints", states}};
      emit_json(dir + "meta.json", meta);
      runs.push_back(meta);
    }
    emit_json("trace/meta.json", {{"config", config_to_json(cfg_)},
                                  {"derived", constants_json()},
                                  {"barriers", to_json(*bp_, tau_half_)}});
    emit_json("trace/family.json", {{"t_end", fr.plan.t_end},
                                    {"s", fr.plan.s},
                                    {"delta", fr.plan.delta},
                                    {"tau_delta", fr.plan.tau_delta},
                                    {"inner_window_sup", wsup},
                                    {"inner_monotone_tol", cc.control.tol * wsup},
                                    {"runs", runs}});
  }

  double stage_seconds(const std::string& name) const {
    const auto j = stage_record(name);
    return j ? j->value("seconds", 0.0) : 0.0;
  }

  static CriterionResult blocked(int id, const std::string& name, const std::string& note) {
    CriterionResult r;
    r.id = id;
    r.name = name;
    r.status = Status::Blocked;
    r.note = note;
    return r;
  }

  static CriterionResult failed(int id, const std::string& name, const std::string& note) {
    CriterionResult r = blocked(id, name, note);
    r.status = Status::Fail;
    return r;
  }

  // Criterion of a stage whose outputs are evaluated by fn.
  template <class Fn>
  CriterionResult from_stage(int id, const std::string& name, const std::string& stage, Fn&& fn) const {
    const auto rec = stage_record(stage);
    const std::string st = rec ? rec->value("status", std::string()) : "not run";
    if (st == "failed") return failed(id, name, "stage '" + stage + "' failed: " + rec->value("note", std::string()));
    if (st != "done") {
      std::string why = "stage '" + stage + "' is " + st;
      if (rec && !rec->value("note", std::string()).empty()) why += " (" + rec->value("note", std::string()) + ")";
      return blocked(id, name, why);
    }
    try {
      return fn(rec->value("seconds", 0.0));
    } catch (const std::exception& e) {
      return failed(id, name, e.what());
    }
  }

  Report build_report() const {
    std::map<int, CriterionResult> crit;
    const auto crec = stage_record("checks");
    const std::string cst = crec ? crec->value("status", std::string()) : "not run";
    const std::vector<std::pair<int, const char*>> check_ids{{1, "eigenfunction identity"}, {2, "phi_4 exact values"},
                                                             {3, "auxiliary g boundary value problem"},
                                                             {4, "Alencar profile"}, {5, "linearized operators"},
                                                             {7, "solver verification"}};
    if (cst == "done") {
      const json cj = read_json(opt_.out / "checks.json");
      for (const auto& c : cj.at("criteria")) {
        CriterionResult r = criterion_from_json(c);
        r.seconds = crec->at("criteria_seconds").value(std::to_string(r.id), 0.0);
        crit[r.id] = r;
      }
    } else {
      for (const auto& [id, nm] : check_ids)
        crit[id] = cst == "failed" ? failed(id, nm, "stage 'checks' failed: " + crec->value("note", std::string()))
                                   : blocked(id, nm, "stage 'checks' is " + cst);
    }
    crit[6] = from_stage(6, "barrier certification", "barriers", [&](double sec) {
      return evaluate_barriers(read_json(opt_.out / "barriers.json"), sec);
    });
    crit[8] = from_stage(8, "continuation runs", "evolve",
                         [&](double sec) { return evaluate_family(opt_.out / "trace", cfg_, sec); });
    if (opt_.compare) {
      crit[9] = compare_outputs(opt_.out, *opt_.compare);
    } else {
      crit[9] = blocked(9, "determinism", "needs a second execution: report --compare OTHER_OUT");
      crit[9].target = "two executions of `all` give byte-identical CSV/JSON outputs";
    }

    Report rep;
    json arr = json::array();
    json timings = json::object();
    int npass = 0, nfail = 0, nblocked = 0;
    for (auto& [id, r] : crit) {
      const bool runtime_ok = r.status == Status::Blocked || r.id == 9 || r.seconds <= r.runtime_limit;
      if (r.status == Status::Pass && !runtime_ok) {
        r.status = Status::Fail;
        r.note += (r.note.empty() ? "" : "; ") + std::string("runtime limit exceeded");
      }
      json j = to_json(r);
      j["runtime_ok"] = runtime_ok;
      arr.push_back(j);
      timings["criterion_" + std::to_string(id)] = r.seconds;
      (r.status == Status::Pass ? npass : r.status == Status::Fail ? nfail : nblocked)++;
      rep.criteria.push_back(r);
    }
    json stages = json::array();
    for (const auto& s : stage_names()) {
      const auto rec = stage_record(s);
      stages.push_back({{"name", s},
                        {"status", rec ? rec->value("status", std::string()) : "not run"},
                        {"note", rec ? rec->value("note", std::string()) : ""}});
      timings["stage_" + s] = stage_seconds(s);
    }
    rep.exit_code = nfail == 0 ? 0 : 1;
    rep.doc = {{"config", config_to_json(cfg_)},
               {"environment",
                {{"compiler", __VERSION__},
                 {"cplusplus", static_cast<long>(__cplusplus)},
                 {"state_precision", "binary128"},
                 {"deterministic", true}}},
               {"stages", stages},
               {"criteria", arr},
               {"summary", {{"pass", npass}, {"fail", nfail}, {"blocked", nblocked}, {"exit_code", rep.exit_code}}},
               {"timings", timings}};
    return rep;
  }

  static std::string timings_text(const Report& rep) {
    std::string s;
    for (const auto& [k, v] : rep.doc.at("timings").items()) s += k + " " + fmt17(v.get<double>()) + "\n";
    return s;
  }
};

// One pass/fail line per criterion.
inline std::string summary_lines(const Report& rep) {
  std::string s;
  for (const auto& r : rep.criteria) {
    char head[64];
    std::snprintf(head, sizeof head, "criterion %d [%s] ", r.id, to_string(r.status));
    s += head + r.name;
    if (!r.note.empty()) s += " (" + r.note + ")";
    s += "\n";
  }
  return s;
}

}  // namespace mcf
