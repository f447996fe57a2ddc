#pragma once

#include <map>
#include <optional>
#include <string>

#include "sparseweak/weaktype.hpp"

namespace sparseweak {

/// Flat "section.key" -> value table read from an INI file, with inline
/// flags layered on top. Recognised sections: grid, young, sparse, operator,
/// functions, run, output.
using ConfigValues = std::map<std::string, std::string>;

/// Parses INI text. Unknown sections or keys throw PreconditionError.
ConfigValues parse_config(const std::string& text);
/// Reads and parses an INI file; a missing file throws PreconditionError.
ConfigValues read_config(const std::string& path);

/// Typed view of a configuration, validated before any computation.
struct ExperimentConfig {
  std::string command;
  ExperimentSettings experiment;
  SanitySettings sanity;
  std::optional<std::string> family_file;
  PackingMode packing = PackingMode::carleson_sum;
  std::optional<std::string> json_path;
  std::optional<std::string> csv_path;
  std::optional<std::string> out_path;
  std::optional<std::string> trend_path;
};

/// Builds the typed configuration for `command`. Referenced input files must
/// exist and output directories must be writable.
ExperimentConfig build_config(const std::string& command, const ConfigValues& values);

enum class ReportFormat { json, csv };

/// JSON document: config echo, c_phi, per_trial (with lemma_ledger) and
/// aggregate. Keys are in a fixed order and reals carry 17 significant digits.
std::string report_json(const ExperimentReport& report);
/// Header "trial,seed,lhs,rhs,ratio" and one row per trial.
std::string report_csv(const ExperimentReport& report);

/// Writes the report; an unwritable path throws PreconditionError.
void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path);

std::string sanity_json(const SanitySettings& settings, const SanityReport& report);

/// Entry point of the sparseweak executable. Returns 0 on success, 1 on
/// validation errors and 2 when a computation is refused.
int run_cli(int argc, char** argv);

}  // namespace sparseweak
