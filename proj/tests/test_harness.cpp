#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "liouville/harness.hpp"

using namespace liouville;
using json = nlohmann::json;

namespace {

ExperimentConfig config(ExperimentKind k, const std::string& text) { return {k, parse_config_text(text), ""}; }

std::string usage_field(const ExperimentConfig& c) {
  try {
    run_experiment(c);
  } catch (const UsageError& e) {
    return e.field();
  }
  return "<none>";
}

std::filesystem::path temp_file(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("config text") {
  const json j = parse_config_text(
      "# comment\n"
      "gamma = 1.2   # trailing\n"
      "\n"
      "resolutions = [16, 32]\n"
      "crn = true\n"
      "export = out/field.bin\n"
      "insertions = [[0, 0, 1.8], [1, 0, 1.8], [\"inf\", 1.8]]\n");
  CHECK(j.at("gamma").get<double>() == 1.2);
  CHECK(j.at("resolutions").size() == 2);
  CHECK(j.at("crn").get<bool>());
  CHECK(j.at("export").get<std::string>() == "out/field.bin");
  CHECK(j.at("insertions")[2][0] == "inf");
  CHECK_THROWS_AS(parse_config_text("gamma = 1\ngamma = 2\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("gamma 1\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("gamma =\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("x = [1, 2\n"), UsageError);
}

TEST_CASE("kind names") {
  for (ExperimentKind k : all_kinds()) CHECK(parse_kind(kind_name(k)) == k);
  CHECK(all_kinds().size() == 11);
  CHECK_THROWS_AS(parse_kind("bogus"), UsageError);
}

TEST_CASE("parameters are validated before any work") {
  CHECK(usage_field(config(ExperimentKind::three_point, "samples = 10\n")) == "gamma");
  CHECK(usage_field(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ncolour = 3\n")) == "colour");
  CHECK(usage_field(config(ExperimentKind::chaos_mass, "gamma = 2.5\n")) == "gamma");
  CHECK(usage_field(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ndual_gamma = 1\n")) == "dual_gamma");
  CHECK(usage_field(config(ExperimentKind::three_point, "gamma = 1\nsamples = 1\n")) == "samples");
  CHECK(usage_field(config(ExperimentKind::three_point, "gamma = 1\nresolution = 16\nresolutions = [16]\n")) != "<none>");
  CHECK(usage_field(config(ExperimentKind::three_point, "gamma = 1\ninsertions = [[0, 0, 1.0], [1, 0, 1.0], [\"inf\", 1.0]]\n")) ==
        "insertions");
  CHECK(usage_field(config(ExperimentKind::mobius_check, "gamma = 1\ninsertions = [[0, 0, 2.2], [1, 0, 2.2], [0.3, 0.9, 1.0]]\n")) ==
        "insertions");
  CHECK(usage_field(config(ExperimentKind::fusion_scan, "gamma = 1\ndistances = [0.1, 0.2, 0.5]\n")) == "distances");
}

TEST_CASE("dozz-sweep record") {
  const RunRecord r = run_experiment(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ncount = 5\nseed = 3\n"));
  CHECK(r.kind == "dozz-sweep");
  CHECK(r.version == kVersion);
  CHECK(r.seed == 3);
  CHECK(r.all_pass());
  const Quantity* q = r.find("primal_shift_max_residual");
  REQUIRE(q != nullptr);
  CHECK(q->check == "1b");
  CHECK(q->value < 1e-8);
  CHECK(r.series_rows.size() >= 5);

  const RunRecord again = run_experiment(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ncount = 5\nseed = 3\n"));
  CHECK(same_values(r, again));
  const RunRecord other = run_experiment(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ncount = 5\nseed = 4\n"));
  CHECK_FALSE(same_values(r, other));
}

TEST_CASE("structured output round trip") {
  const RunRecord r = run_experiment(config(ExperimentKind::chaos_mass, "gamma = [0.5, 1.0]\nsamples = 20\nresolution = 16\n"));
  const RunRecord back = parse_structured(to_structured(r));
  CHECK(same_values(r, back));
  CHECK(back.wall_seconds == r.wall_seconds);
  CHECK(back.config == r.config);
  const json j = json::parse(to_structured(r));
  for (const char* key : {"kind", "version", "config", "wall_seconds", "seed", "quantities", "all_pass"}) CHECK(j.contains(key));
}

TEST_CASE("tabular output") {
  const RunRecord f = run_experiment(
      config(ExperimentKind::fusion_scan, "gamma = 1\nsamples = 12\nresolution = 16\ndistances = [0.01, 0.1, 0.5]\n"));
  std::istringstream is(to_tabular(f));
  std::string header;
  std::getline(is, header);
  CHECK(header == "distance\testimate\tstderr");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 3);

  const RunRecord d = run_experiment(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ncount = 3\n"));
  std::istringstream ds(to_tabular(d));
  std::getline(ds, header);
  CHECK(header == "name\tcheck\tvalue\tstd_err\treference\ttolerance\tpass");
}

TEST_CASE("results are not overwritten without force") {
  const RunRecord d = run_experiment(config(ExperimentKind::dozz_sweep, "gamma = 1.2\ncount = 3\n"));
  const auto path = temp_file("liouville_harness_test.json");
  write_results(d, OutputFormat::structured, path.string(), false);
  CHECK_THROWS_AS(write_results(d, OutputFormat::structured, path.string(), false), std::runtime_error);
  write_results(d, OutputFormat::tabular, path.string(), true);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("name\t", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("worker count does not change the numbers") {
  const std::string base = "gamma = 1\nsamples = 16\nresolution = 16\n";
  const RunRecord a = run_experiment(config(ExperimentKind::three_point, base + "workers = 1\n"));
  const RunRecord b = run_experiment(config(ExperimentKind::three_point, base + "workers = 4\n"));
  CHECK(same_values(a, b));
  const RunRecord m1 = run_experiment(config(ExperimentKind::mobius_check, base + "workers = 1\n"));
  const RunRecord m3 = run_experiment(config(ExperimentKind::mobius_check, base + "workers = 3\n"));
  CHECK(same_values(m1, m3));
}

TEST_CASE("every kind runs at small size") {
  const std::string mc = "gamma = 1\nsamples = 10\nresolution = 32\n";
  const std::pair<ExperimentKind, std::string> runs[] = {
      {ExperimentKind::sample_field, mc},
      {ExperimentKind::covariance_audit, mc + "variance_lmax = [16, 32]\nvariance_points = 4\npairs = 4\n"},
      {ExperimentKind::chaos_mass, mc},
      {ExperimentKind::kpz_check, mc + "decay_samples = 10\ndecay_resolution = 32\ndecay_radii = [5, 10, 20]\n"},
      {ExperimentKind::ward_rules, mc},
      {ExperimentKind::fourpoint_compare, mc + "z = [[0.3, 0.2]]\ntrend_z = [0.2, 0.1, 0.05]\n"},
      {ExperimentKind::specfn_audit, "gamma = [1.0]\npoints = 5\npde_points = 2\nselberg_pairs = 1\n"},
  };
  for (const auto& [kind, text] : runs) {
    CAPTURE(kind_name(kind));
    const RunRecord r = run_experiment(config(kind, text));
    CHECK(!r.quantities.empty());
    for (const auto& q : r.quantities) CHECK(std::isfinite(q.value));
  }
}
