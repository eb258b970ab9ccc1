// Acceptance run: two full executions of the pipeline, then the report with the determinism
// comparison. Prints one line per criterion and exits nonzero unless every criterion passes.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mcf/config.hpp"
#include "mcf/pipeline.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"acceptance: run the pipeline twice and report criteria 1-9"};
  std::string out = "acceptance_out", config;
  int threads = 1;
  app.add_option("--out", out, "scratch root; run_a and run_b are created below it");
  app.add_option("--config", config, "JSON run configuration");
  app.add_option("--threads", threads, "worker threads for the family of runs")->check(CLI::Range(1, 256));
  CLI11_PARSE(app, argc, argv);

  try {
    const mcf::RunConfig cfg = config.empty() ? mcf::RunConfig{} : mcf::parse_config(config);
    const fs::path root(out), a = root / "run_a", b = root / "run_b";
    fs::remove_all(a);
    fs::remove_all(b);

    for (const fs::path& dir : {a, b}) {
      mcf::PipelineOptions opt;
      opt.out = dir;
      opt.threads = threads;
      std::cerr << "== all -> " << dir.string() << "\n";
      mcf::Pipeline(cfg, opt).run();
    }

    mcf::PipelineOptions opt;
    opt.out = a;
    opt.stages = {"report"};
    opt.compare = b;
    opt.quiet = true;
    const mcf::Report rep = mcf::Pipeline(cfg, opt).run();

    bool all_pass = rep.criteria.size() == 9;
    for (const auto& c : rep.criteria) {
      const char* tag = c.status == mcf::Status::Pass ? "PASS" : c.status == mcf::Status::Fail ? "FAIL" : "BLOCKED";
      std::printf("criterion %d: %s  %s  [%.2f s]%s%s\n", c.id, tag, c.name.c_str(), c.seconds,
                  c.note.empty() ? "" : "  ", c.note.c_str());
      all_pass = all_pass && c.status == mcf::Status::Pass;
    }
    std::printf("acceptance: %s\n", all_pass ? "PASS" : "FAIL");
    return all_pass ? 0 : 1;
  } catch (const mcf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
