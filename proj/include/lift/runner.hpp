#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lift/backends.hpp"
#include "lift/baselines.hpp"
#include "lift/data.hpp"
#include "lift/eval.hpp"
#include "lift/http_backend.hpp"
#include "lift/parse.hpp"
#include "lift/perturb.hpp"
#include "lift/prompts.hpp"
#include "lift/synth.hpp"

namespace lift::runner {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

struct CsvSource {
  std::filesystem::path path;
  CsvOptions options;
  // 784-pixel rows are cropped to 18x18 and optionally scaled to [0, 1]
  bool image = false;
  bool image_crop = true;
  bool image_unit_scale = false;
};

struct SynthSource {
  enum class Type { regression, classification, heteroscedastic };
  Type type = Type::classification;
  synth::FunctionKind function = synth::FunctionKind::linear;
  synth::Shape shape = synth::Shape::blobs;
  std::size_t p = 1;
  std::size_t n = 0;
  double sigma = 0.1;  // regression noise std
  double noise = 0.1;  // classification shape noise
  std::uint64_t seed = 0;
};

struct DatasetSource {
  std::optional<CsvSource> csv;
  std::optional<SynthSource> synth;

  TabularDataset load() const;
  std::string label() const;
};

struct BackendConfig {
  backends::BackendKind kind = backends::BackendKind::memorizer;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> store_dir;  // memorizer
  backends::HttpOptions http;
  std::vector<std::string> responses;  // scripted
  bool cycle = true;                   // scripted
};

struct PerturbOp {
  enum class Type { corrupt_random, corrupt_systematic, outliers, augment_gaussian, feature_noise };
  Type type = Type::corrupt_random;
  double fraction = 0.0;
  double epsilon = 0.0;
  std::size_t copies = 1;
  std::optional<std::pair<double, double>> clamp;
  perturb::NoiseKind noise = perturb::NoiseKind::gaussian_linf;
  std::uint64_t seed = 0;  // mixed with the repeat seed
};

enum class Mode { fine_tune, two_stage, in_context, baseline };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct TwoStageConfig {
  std::size_t pretext_epochs = 2;
  std::size_t per_cluster = 100;
  std::size_t regression_n = 500;
};

struct InContextConfig {
  std::size_t max_chars = 2048;
  std::string base_model = "davinci-002";
  std::string separator = "\n";
};

struct BaselineConfig {
  baselines::BaselineKind kind = baselines::BaselineKind::mcc;
  std::vector<baselines::Hyperparameters> grid{baselines::Hyperparameters{}};
};

struct CalibrationConfig {
  std::size_t repeats = 20;
  std::size_t bins = 10;
  double temperature = 1.0;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  DatasetSource dataset;
  SplitSpec split;
  prompts::PromptTemplate prompt_template;
  BackendConfig backend;
  std::vector<backends::FineTuneSpec> fine_tune_grid{backends::FineTuneSpec{}};
  parse::RetryPolicy retry;
  std::size_t max_tokens = 64;
  std::vector<PerturbOp> train_perturbations;
  std::vector<perturb::NoiseSpec> test_noise;
  Mode mode = Mode::fine_tune;
  TwoStageConfig two_stage;
  InContextConfig in_context;
  BaselineConfig baseline;
  std::optional<CalibrationConfig> calibration;
  std::optional<std::string> positive_label;
  std::size_t repeats = 1;
  std::size_t concurrency = 1;
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
};

/// Replaces ${NAME} in every string value with the environment variable.
json interpolate_env(const json& j);

/// Sets a dotted key path ("split.seed", "fine_tune_grid.0.epochs") to a
/// value parsed as JSON, or as a plain string when that fails.
void apply_override(json& j, std::string_view assignment);

ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Top-level keys accepted by config_from_json.
const std::vector<std::string>& config_keys();

std::unique_ptr<backends::Backend> make_backend(const BackendConfig& config, std::uint64_t repeat_seed);

// ---------------------------------------------------------------------------
// Results

struct PredictionRecord {
  std::size_t row = 0;  // index into the test split
  std::string prompt;
  Target truth;
  parse::Prediction prediction;
  std::optional<std::size_t> prompts_used;  // in-context only
};

struct GridPointResult {
  std::size_t index = 0;
  json spec;
  std::optional<double> validation_metric;  // accuracy (%) or RAE
  std::string model_id;
};

struct RepeatResult {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::vector<GridPointResult> grid;
  std::size_t selected = 0;
  eval::MetricReport test;
  std::optional<std::size_t> prompts_used;
  std::vector<PredictionRecord> predictions;
  std::vector<eval::CalibrationBin> calibration;
};

struct ErrorInfo {
  std::string code;
  std::string message;
};

struct ExperimentResult {
  std::string name;
  std::string dataset;
  std::string method;
  std::string config_hash;
  TaskKind task = TaskKind::classification;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::vector<RepeatResult> repeats;
  std::optional<ErrorInfo> error;
  std::map<std::string, double> timing;  // seconds per phase; kept out of result.json

  bool ok() const { return !error; }
  json to_json() const;
};

/// Which split a pipeline step touched, and during which phase.
struct DataAccess {
  std::string phase;  // "train", "validate", "select", "test"
  std::string split;  // "train", "validation", "test", or "" for none
  std::size_t repeat = 0;
};

struct RunHooks {
  std::function<void(const DataAccess&)> on_access;
  // Replaces make_backend(config.backend, repeat_seed) when set.
  std::function<std::unique_ptr<backends::Backend>(std::uint64_t repeat_seed)> backend_factory;
};

/// Runs the configured pipeline. Library errors are caught and recorded in
/// the result (and result.json) with partial artifacts kept; only invalid
/// configurations throw.
ExperimentResult run(const ExperimentConfig& config, const RunHooks& hooks = {});

/// Same, on an explicit split (the sweep reuses one split for all sizes).
ExperimentResult run_on_split(const ExperimentConfig& config, const DatasetSplits& splits, const RunHooks& hooks = {});

ExperimentResult run_in_context(const ExperimentConfig& config, const RunHooks& hooks = {});

/// One run per train size on nested prefixes of a seeded permutation of the
/// training split; validation and test are shared.
std::vector<ExperimentResult> sample_complexity_sweep(const ExperimentConfig& config,
                                                      const std::vector<std::size_t>& sizes,
                                                      const RunHooks& hooks = {});

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { json, csv, markdown };

ReportFormat parse_report_format(std::string_view text);

struct ReportRow {
  std::string dataset;
  std::string method;
  TaskKind task = TaskKind::classification;
  std::vector<double> accuracy;
  std::vector<double> rmse;
  std::vector<double> rae;
  // published figure rows carry a fixed mean and std
  std::optional<std::pair<double, std::optional<double>>> reference;
};

/// "mean±std" with population std and two decimals.
std::string mean_std_cell(std::span<const double> values);

ReportRow report_row(const json& result);
std::vector<ReportRow> reference_rows(std::span<const baselines::ReferenceResult> refs, const std::string& dataset);

std::string emit_report(std::span<const ReportRow> rows, ReportFormat format);

/// FNV-1a over the bytes, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace lift::runner
