#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace liouville {

inline constexpr const char* kVersion = "1.0.0";

enum class ExperimentKind {
  sample_field,
  covariance_audit,
  chaos_mass,
  three_point,
  kpz_check,
  ward_rules,
  mobius_check,
  fusion_scan,
  fourpoint_compare,
  dozz_sweep,
  specfn_audit,
};

const std::vector<ExperimentKind>& all_kinds();
std::string kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& name);  // UsageError on unknown names

// Invalid configuration; `field` names the offending key.
class UsageError : public std::invalid_argument {
 public:
  UsageError(std::string field, const std::string& what)
      : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Flat `key = value` lines, values are JSON literals (bare words are read as strings).
// Insertions are written as [[re, im, alpha], ..., ["inf", alpha]].
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::dozz_sweep;
  nlohmann::json params = nlohmann::json::object();
  std::string output_path;
};

struct Quantity {
  std::string name;
  std::string check;  // acceptance criterion this gates, empty for diagnostics
  double value = 0.0;
  double std_err = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;  // pass iff |value - reference| <= tolerance
  bool pass = true;
  bool gated = false;
  bool timing = false;  // wall-clock measurement, excluded from the determinism contract
};

struct RunRecord {
  std::string kind;
  std::string version = kVersion;
  nlohmann::json config = nlohmann::json::object();
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<Quantity> quantities;
  std::vector<std::string> series_columns;
  std::vector<std::vector<double>> series_rows;
  nlohmann::json metadata = nlohmann::json::object();

  bool all_pass() const;
  const Quantity* find(const std::string& name) const;
};

// Validates every parameter before computing anything.
RunRecord run_experiment(const ExperimentConfig& config);

std::string to_structured(const RunRecord& r);
RunRecord parse_structured(const std::string& text);
std::string to_tabular(const RunRecord& r);

enum class OutputFormat { structured, tabular };
// Throws std::runtime_error if the file exists and `force` is false, or on I/O failure.
void write_results(const RunRecord& r, OutputFormat format, const std::string& path, bool force);

// Equality of everything except wall time and timing quantities.
bool same_values(const RunRecord& a, const RunRecord& b);

}  // namespace liouville
