// liouville <kind> --config FILE [--seed N] [--samples N] [--resolution N] [--out PATH]
//           [--format structured|tabular] [--workers N] [--force]
// Exit codes: 0 all checks pass, 1 a check failed, 2 usage error, 3 runtime error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "liouville/harness.hpp"

using namespace liouville;

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and exact-side checks of Liouville sphere correlations"};
  std::string kind, config_path, out, format = "structured";
  std::optional<std::uint64_t> seed;
  std::optional<long long> samples, resolution;
  std::optional<unsigned> workers;
  bool force = false;

  std::string kinds;
  for (auto k : all_kinds()) kinds += (kinds.empty() ? "" : ", ") + kind_name(k);
  app.add_option("kind", kind, "experiment: " + kinds)->required();
  app.add_option("--config", config_path, "flat key = value configuration file")->required();
  app.add_option("--seed", seed, "base seed");
  app.add_option("--samples", samples, "Monte Carlo samples");
  app.add_option("--resolution", resolution, "grid rings per hemisphere and spectral cutoff");
  app.add_option("--out", out, "output file (default: stdout)");
  app.add_option("--format", format, "structured or tabular")->check(CLI::IsMember({"structured", "tabular"}));
  app.add_option("--workers", workers, "worker threads (default: $LIOUVILLE_WORKERS or 1)");
  app.add_flag("--force", force, "overwrite an existing output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg;
    cfg.kind = parse_kind(kind);
    cfg.params = load_config_file(config_path);
    cfg.output_path = out;
    if (seed) cfg.params["seed"] = *seed;
    if (samples) cfg.params["samples"] = *samples;
    if (resolution) {
      cfg.params.erase("resolutions");
      cfg.params["resolution"] = *resolution;
    }
    if (workers) {
      cfg.params["workers"] = *workers;
    } else if (const char* env = std::getenv("LIOUVILLE_WORKERS"); env && !cfg.params.contains("workers")) {
      char* end = nullptr;
      const long n = std::strtol(env, &end, 10);
      if (*env == '\0' || *end != '\0' || n < 1) throw UsageError("LIOUVILLE_WORKERS", "expected a positive integer");
      cfg.params["workers"] = n;
    }
    const OutputFormat fmt = format == "tabular" ? OutputFormat::tabular : OutputFormat::structured;
    if (!out.empty() && std::filesystem::exists(out) && !force)
      throw UsageError("--out", out + " exists (use --force to overwrite)");

    const RunRecord rec = run_experiment(cfg);
    if (out.empty()) {
      std::cout << (fmt == OutputFormat::structured ? to_structured(rec) : to_tabular(rec));
    } else {
      write_results(rec, fmt, out, force);
    }
    for (const auto& q : rec.quantities)
      if (q.gated)
        std::fprintf(stderr, "%-4s %-36s %.6g (ref %.6g, tol %.3g)\n", q.pass ? "ok" : "FAIL", q.name.c_str(), q.value,
                     q.reference, q.tolerance);
    std::fprintf(stderr, "%s: %s in %.1f s\n", rec.kind.c_str(), rec.all_pass() ? "all checks pass" : "checks failed",
                 rec.wall_seconds);
    return rec.all_pass() ? 0 : 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
