// mcflab: runs the continuation pipeline and its checks from a JSON config.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mcf/config.hpp"
#include "mcf/pipeline.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::string only;
  bool resume = false;
  int threads = 1;
  std::string samples;
  std::string compare;
  std::string trace;
};

// "NxM" -> (N, M)
void apply_samples(const std::string& s, mcf::RunConfig& cfg) {
  const auto x = s.find('x');
  int n1 = 0, n2 = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t p1 = 0, p2 = 0;
    n1 = std::stoi(s.substr(0, x), &p1);
    n2 = std::stoi(s.substr(x + 1), &p2);
    if (p1 != x || p2 != s.size() - x - 1) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    mcf::fail(mcf::ErrorKind::ConfigError, "--samples expects NxM, got '" + s + "'");
  }
  if (n1 < 2 || n2 < 2) mcf::fail(mcf::ErrorKind::ConfigError, "--samples needs N, M >= 2");
  cfg.barriers.grid.n1 = n1;
  cfg.barriers.grid.n2 = n2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcflab: rotationally symmetric mean curvature flow continuation runs"};
  app.require_subcommand(1);
  app.fallthrough();
  Args a;
  app.add_option("--config", a.config, "JSON run configuration (defaults apply when omitted)");
  app.add_option("--out", a.out, "output directory (default: $MCFLAB_OUT or ./out)");
  app.add_option("--only", a.only, "run the pipeline only through this stage");
  app.add_flag("--resume", a.resume, "skip stages whose recorded outputs are intact");
  app.add_option("--threads", a.threads, "worker threads for the family of runs")->check(CLI::Range(1, 256));

  auto* alencar = app.add_subcommand("alencar", "shoot the Alencar profile");
  auto* eigen = app.add_subcommand("eigen", "tabulate the eigenfunction phi_k");
  auto* gsolve = app.add_subcommand("gsolve", "solve the auxiliary boundary value problem for g");
  auto* barriers = app.add_subcommand("barriers", "search for or verify barrier constants");
  auto* bverify = barriers->add_subcommand("verify", "verify configured or previously found constants");
  auto* bsearch = barriers->add_subcommand("search", "search for constants, ignoring configured ones");
  barriers->add_option("--samples", a.samples, "residual sample grid NxM per region");
  auto* evolve = app.add_subcommand("evolve", "run the family of continuation runs");
  auto* report = app.add_subcommand("report", "aggregate the acceptance criteria from existing outputs");
  report->add_option("--compare", a.compare, "second output root of an identical execution");
  report->add_option("--trace", a.trace, "output root to report on; --out then names the report file");
  auto* all = app.add_subcommand("all", "run every stage");

  CLI11_PARSE(app, argc, argv);

  try {
    mcf::RunConfig cfg = a.config.empty() ? mcf::RunConfig{} : mcf::parse_config(a.config);
    if (!a.samples.empty()) apply_samples(a.samples, cfg);

    mcf::PipelineOptions opt;
    // report --trace ROOT --out FILE: read ROOT, copy the report to FILE
    std::string report_copy;
    if (*report && !a.trace.empty()) {
      report_copy = a.out;
      a.out = a.trace;
    }
    if (a.out.empty()) {
      const char* env = std::getenv("MCFLAB_OUT");
      a.out = env && *env ? env : "out";
    }
    opt.out = a.out;
    opt.resume = a.resume;
    opt.threads = a.threads;
    if (*alencar) opt.stages = mcf::stages_through("alencar");
    if (*eigen) opt.stages = mcf::stages_through("eigen");
    if (*gsolve) opt.stages = mcf::stages_through("gsolve");
    if (*barriers) {
      opt.stages = mcf::stages_through("barriers");
      if (*bverify) opt.barrier_mode = mcf::BarrierMode::Verify;
      if (*bsearch) opt.barrier_mode = mcf::BarrierMode::Search;
    }
    if (*evolve) opt.stages = mcf::stages_through("evolve");
    if (*all) opt.stages = mcf::stage_names();
    if (*report) {
      opt.stages = {"report"};
      if (!a.compare.empty()) opt.compare = a.compare;
    }
    if (!a.only.empty()) {
      if (*report) mcf::fail(mcf::ErrorKind::ConfigError, "--only does not apply to report");
      opt.stages = mcf::stages_through(a.only);
    }

    mcf::Pipeline pipe(cfg, opt);
    const mcf::Report rep = pipe.run();
    if (!report_copy.empty()) {
      std::filesystem::path dst(report_copy);
      if (dst.extension() != ".json") dst /= "report.json";
      mcf::write_text(dst, mcf::read_text(opt.out / "report.json"));
    }
    std::cout << mcf::summary_lines(rep);
    return rep.exit_code;
  } catch (const mcf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
