#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hardedge/comparison.hpp"
#include "hardedge/ensembles.hpp"
#include "hardedge/experiments.hpp"

namespace hardedge {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1.0";

/// Schema versions this build can read.
const std::vector<std::string>& compatible_schemas();

/// Raised for malformed configs and manifests. `field` is a JSON path such
/// as "trials" or "ensemble.kind".
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

json law_to_json(const EntryLaw& law);
/// Accepts the object form or a label string ("rademacher-complex", ...).
EntryLaw law_from_json(const json& j, const std::string& path = "ensemble");
EntryLaw law_from_label(const std::string& label);

json stream_to_json(const RngStreamSpec& s);
RngStreamSpec stream_from_json(const json& j, const std::string& path = "rng");

json config_to_json(const ExperimentConfig& cfg);
/// Required: name, N_list, ensemble, trials, master_seed. Throws SchemaError.
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

inline constexpr const char* kRecordHeader =
    "experiment,N,M,ensemble,param,trial,seed,sigma1,sigmaN,kappa,aux1,aux2";

void write_records_csv(std::ostream& out, std::span<const TrialRecord> records);
std::vector<TrialRecord> read_records_csv(std::istream& in);

/// {config_echo, quantiles, ks, slopes, margins, calibration_constants}.
json summary_to_json(const SummaryStats& stats, const ExperimentConfig& cfg);

/// Header x,y,ci_lo,ci_hi.
void write_plot_csv(std::ostream& out, const PlotSeries& series);

/// Header trial,ensemble,trace_f,F_value; two rows per trial.
void write_lindeberg_csv(std::ostream& out, const LindebergResult& result,
                         const std::string& label_x, const std::string& label_y);
json lindeberg_to_json(const LindebergResult& result);

struct RunManifest {
  std::string schema_version = kSchemaVersion;
  ExperimentConfig config;
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::string> artifact_hashes;  // file name -> hex SHA-256
  std::string rng_algorithm_label = kRngAlgorithmLabel;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// UTC timestamp, ISO 8601 to the second.
std::string utc_now();

/// Hashes every regular file in dir (except the manifest) into
/// manifest.artifact_hashes and writes dir/manifest.json.
void write_manifest(RunManifest manifest, const std::filesystem::path& dir);
RunManifest read_manifest(const std::filesystem::path& dir);

/// Files whose current hash differs from the manifest, or that are missing.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

/// Creates dir. An existing non-empty dir is a std::invalid_argument unless
/// force is set, in which case its contents are removed first.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace hardedge
