#include "hardedge/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>

namespace hardedge {

namespace {

constexpr const char* kManifestName = "manifest.json";

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(path, std::string("wrong type (") + e.what() + ")");
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::map<std::string, double> number_map(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object of numbers");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) out[k] = number(v, join(path, k));
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <class Int>
Int parse_int(const std::string& s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("cannot parse integer '" + s + "'");
  }
  return v;
}

json quantiles_json(const QuantileSummary& q) {
  return {{"count", q.count},   {"q50", q.q50},           {"q90", q.q90},
          {"q99", q.q99},       {"median_lo", q.median_lo}, {"median_hi", q.median_hi}};
}

}  // namespace

const std::vector<std::string>& compatible_schemas() {
  static const std::vector<std::string> versions{"1.0"};
  return versions;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"nan" spelled by other writers; fall back.
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::invalid_argument("cannot parse number '" + s + "'");
  }
  return v;
}

// ----------------------------------------------------------------- laws

EntryLaw law_from_label(const std::string& label) {
  if (label == "gaussian-complex") return gaussian_complex();
  std::string base = label;
  bool complex_entries = false;
  const std::string suffix = "-complex";
  if (base.size() > suffix.size() && base.ends_with(suffix)) {
    base.resize(base.size() - suffix.size());
    complex_entries = true;
  }
  EntryLaw law;
  switch (law_kind_from_string(base)) {
    case LawKind::GaussianReal: law = complex_entries ? gaussian_complex() : gaussian_real(); break;
    case LawKind::GaussianComplex: law = gaussian_complex(); break;
    case LawKind::Rademacher: law = rademacher(complex_entries); break;
    case LawKind::UniformSymmetric:
      law = uniform_symmetric();
      law.complex_entries = complex_entries;
      break;
    case LawKind::ThreePoint:
      throw std::invalid_argument("three-point laws need atoms and probs; use the object form");
  }
  return law;
}

json law_to_json(const EntryLaw& law) {
  json j{{"kind", to_string(law.kind)},
         {"complex", law.complex_entries},
         {"moments", law.moments},
         {"theta", law.theta}};
  if (!law.atoms.empty()) {
    j["atoms"] = law.atoms;
    j["probs"] = law.probs;
  }
  return j;
}

EntryLaw law_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return law_from_label(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw SchemaError(path, e.what());
    }
  }
  EntryLaw law;
  const auto kind = get_as<std::string>(require(j, "kind", path), join(path, "kind"));
  try {
    law.kind = law_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(join(path, "kind"), e.what());
  }
  if (j.contains("complex")) law.complex_entries = get_as<bool>(j["complex"], join(path, "complex"));
  const auto m = numbers(require(j, "moments", path), join(path, "moments"));
  if (m.size() != 4) throw SchemaError(join(path, "moments"), "expected four moments");
  std::copy(m.begin(), m.end(), law.moments.begin());
  if (j.contains("theta")) law.theta = number(j["theta"], join(path, "theta"));
  if (j.contains("atoms")) law.atoms = numbers(j["atoms"], join(path, "atoms"));
  if (j.contains("probs")) law.probs = numbers(j["probs"], join(path, "probs"));
  try {
    validate(law);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
  return law;
}

json stream_to_json(const RngStreamSpec& s) {
  return {{"master_seed", s.master_seed}, {"stream_id", s.stream_id}, {"algorithm", s.algorithm_label}};
}

RngStreamSpec stream_from_json(const json& j, const std::string& path) {
  RngStreamSpec s;
  s.master_seed = get_as<std::uint64_t>(require(j, "master_seed", path), join(path, "master_seed"));
  s.stream_id = get_as<std::uint64_t>(require(j, "stream_id", path), join(path, "stream_id"));
  s.algorithm_label = get_as<std::string>(require(j, "algorithm", path), join(path, "algorithm"));
  return s;
}

// --------------------------------------------------------------- config

json config_to_json(const ExperimentConfig& cfg) {
  return {{"name", cfg.name},
          {"N_list", cfg.n_list},
          {"M_offset", cfg.m_offset},
          {"ensemble", law_to_json(cfg.ensemble)},
          {"grid", cfg.grid},
          {"r_grid", cfg.r_grid},
          {"trials", cfg.trials},
          {"master_seed", cfg.master_seed},
          {"knobs", cfg.knobs},
          {"calibration", cfg.calibration},
          {"output_path", cfg.output_path}};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("(root)", "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.name = get_as<std::string>(require(j, "name", ""), "name");
  const auto& nl = require(j, "N_list", "");
  if (!nl.is_array()) throw SchemaError("N_list", "expected an array of integers");
  for (std::size_t i = 0; i < nl.size(); ++i) {
    const std::string p = "N_list[" + std::to_string(i) + "]";
    if (!nl[i].is_number_integer()) throw SchemaError(p, "expected an integer");
    cfg.n_list.push_back(nl[i].get<int>());
  }
  cfg.ensemble = law_from_json(require(j, "ensemble", ""), "ensemble");
  const auto& trials = require(j, "trials", "");
  if (!trials.is_number_integer()) throw SchemaError("trials", "expected an integer");
  cfg.trials = trials.get<int>();
  const auto& seed = require(j, "master_seed", "");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned())) {
    throw SchemaError("master_seed", "expected a non-negative integer");
  }
  cfg.master_seed = seed.get<std::uint64_t>();
  if (j.contains("M_offset")) cfg.m_offset = get_as<std::string>(j["M_offset"], "M_offset");
  if (j.contains("grid")) cfg.grid = numbers(j["grid"], "grid");
  if (j.contains("r_grid")) cfg.r_grid = numbers(j["r_grid"], "r_grid");
  if (j.contains("knobs")) cfg.knobs = number_map(j["knobs"], "knobs");
  if (j.contains("calibration")) cfg.calibration = number_map(j["calibration"], "calibration");
  if (j.contains("output_path")) cfg.output_path = get_as<std::string>(j["output_path"], "output_path");
  try {
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    std::string field = "(root)";
    if (msg.rfind("trials", 0) == 0) field = "trials";
    else if (msg.rfind("N_list", 0) == 0) field = "N_list";
    else if (msg.rfind("M_offset", 0) == 0) field = "M_offset";
    else field = "ensemble";
    throw SchemaError(field, msg);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("(file)", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("(file)", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_json(cfg).dump(2) << '\n';
}

// ------------------------------------------------------------------ CSV

void write_records_csv(std::ostream& out, std::span<const TrialRecord> records) {
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << r.experiment << ',' << r.n << ',' << r.m << ',' << r.ensemble << ','
        << format_double(r.param) << ',' << r.trial << ',' << r.seed << ','
        << format_double(r.sigma1) << ',' << format_double(r.sigma_n) << ','
        << format_double(r.kappa) << ',' << format_double(r.aux1) << ',' << format_double(r.aux2)
        << '\n';
  }
}

std::vector<TrialRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty records CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordHeader) throw std::invalid_argument("unexpected records CSV header: " + line);
  std::vector<TrialRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 12) {
      throw std::invalid_argument("records CSV line " + std::to_string(line_no) + ": expected 12 fields");
    }
    TrialRecord r;
    r.experiment = f[0];
    r.n = parse_int<int>(f[1]);
    r.m = parse_int<int>(f[2]);
    r.ensemble = f[3];
    r.param = parse_double(f[4]);
    r.trial = parse_int<int>(f[5]);
    r.seed = parse_int<std::uint64_t>(f[6]);
    r.sigma1 = parse_double(f[7]);
    r.sigma_n = parse_double(f[8]);
    r.kappa = parse_double(f[9]);
    r.aux1 = parse_double(f[10]);
    r.aux2 = parse_double(f[11]);
    out.push_back(std::move(r));
  }
  return out;
}

json summary_to_json(const SummaryStats& stats, const ExperimentConfig& cfg) {
  json quantiles = json::array();
  for (const auto& g : stats.groups) {
    quantiles.push_back({{"statistic", g.statistic}, {"N", g.n}, {"M", g.m}, {"param", g.param},
                         {"quantiles", quantiles_json(g.quantiles)}});
  }
  json ks = json::array();
  for (const auto& k : stats.ks) {
    ks.push_back({{"name", k.name}, {"N", k.n}, {"M", k.m}, {"replicate", k.replicate},
                  {"statistic", k.statistic}, {"critical", k.critical}, {"samples", k.samples}});
  }
  json slopes = json::array();
  for (const auto& s : stats.slopes) {
    slopes.push_back({{"name", s.name}, {"slope", s.slope}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi},
                      {"boot_lo", s.boot_lo}, {"boot_hi", s.boot_hi}, {"points", s.points}});
  }
  json margins = json::array();
  for (const auto& m : stats.margins) {
    margins.push_back({{"name", m.name}, {"N", m.n}, {"param", m.param}, {"observed", m.observed},
                       {"bound", m.bound},
                       {"kind", m.kind == Margin::Kind::Upper ? "upper" : "lower"},
                       {"margin", m.margin()}, {"ok", m.ok()}});
  }
  return {{"experiment", stats.experiment},
          {"config_echo", config_to_json(cfg)},
          {"quantiles", quantiles},
          {"ks", ks},
          {"slopes", slopes},
          {"margins", margins},
          {"calibration_constants", stats.calibration},
          {"all_ok", stats.ok()}};
}

void write_plot_csv(std::ostream& out, const PlotSeries& series) {
  out << "x,y,ci_lo,ci_hi\n";
  for (const auto& p : series.points) {
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.ci_lo) << ','
        << format_double(p.ci_hi) << '\n';
  }
}

void write_lindeberg_csv(std::ostream& out, const LindebergResult& result,
                         const std::string& label_x, const std::string& label_y) {
  out << "trial,ensemble,trace_f,F_value\n";
  for (const auto& t : result.trials) {
    out << t.trial << ',' << label_x << ',' << format_double(t.trace_x) << ',' << format_double(t.f_x) << '\n';
    out << t.trial << ',' << label_y << ',' << format_double(t.trace_y) << ',' << format_double(t.f_y) << '\n';
  }
}

json lindeberg_to_json(const LindebergResult& result) {
  return {{"delta_hat", result.delta_hat}, {"signed_delta", result.signed_delta},
          {"stderr", result.std_error},    {"t", result.t},
          {"budget", result.budget},       {"C", result.c},
          {"eps", result.eps},             {"trials", result.trials.size()}};
}

// -------------------------------------------------------------- manifest

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(RunManifest manifest, const std::filesystem::path& dir) {
  manifest.artifact_hashes.clear();
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir).generic_string();
    if (rel == kManifestName) continue;
    manifest.artifact_hashes[rel] = sha256_file(entry.path());
  }
  const json j{{"schema_version", manifest.schema_version},
               {"config", config_to_json(manifest.config)},
               {"started_at", manifest.started_at},
               {"finished_at", manifest.finished_at},
               {"artifact_hashes", manifest.artifact_hashes},
               {"rng_algorithm_label", manifest.rng_algorithm_label}};
  std::ofstream out(dir / kManifestName);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw SchemaError("(file)", "no manifest in " + dir.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("(file)", std::string("malformed manifest: ") + e.what());
  }
  RunManifest m;
  m.schema_version = get_as<std::string>(require(j, "schema_version", ""), "schema_version");
  const auto& ok = compatible_schemas();
  if (std::find(ok.begin(), ok.end(), m.schema_version) == ok.end()) {
    throw SchemaError("schema_version", "unsupported version " + m.schema_version);
  }
  m.config = config_from_json(require(j, "config", ""));
  m.started_at = get_as<std::string>(require(j, "started_at", ""), "started_at");
  m.finished_at = get_as<std::string>(require(j, "finished_at", ""), "finished_at");
  m.artifact_hashes = get_as<std::map<std::string, std::string>>(require(j, "artifact_hashes", ""),
                                                                 "artifact_hashes");
  m.rng_algorithm_label = get_as<std::string>(require(j, "rng_algorithm_label", ""), "rng_algorithm_label");
  return m;
}

std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  std::vector<std::string> bad;
  for (const auto& [name, hash] : m.artifact_hashes) {
    const auto path = dir / name;
    if (!std::filesystem::is_regular_file(path) || sha256_file(path) != hash) bad.push_back(name);
  }
  return bad;
}

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw std::invalid_argument("output directory " + dir.string() +
                                 " is not empty; pass --force to replace it");
      }
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
    return;
  }
  fs::create_directories(dir);
}

}  // namespace hardedge
