#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lift/runner.hpp"
#include "support.hpp"

namespace lift::runner {
namespace {

json blobs_config(std::size_t n = 200) {
  return json::parse(fmt::format(R"({{
    "name": "blobs",
    "seed": 5,
    "dataset": {{"synth": {{"type": "classification", "shape": "blobs", "n": {}, "noise": 0.5, "seed": 1}}}},
    "split": {{"train": 0.6, "validation": 0.2, "test": 0.2, "seed": 2}},
    "template": {{"decimals": 1}},
    "backend": {{"kind": "memorizer", "seed": 3}}
  }})", n));
}

json regression_config() {
  return json::parse(R"({
    "name": "linear",
    "seed": 1,
    "dataset": {"synth": {"type": "regression", "function": "linear", "p": 1, "n": 100, "sigma": 0.1, "seed": 4}},
    "split": {"train": 0.6, "validation": 0.2, "test": 0.2, "seed": 2},
    "backend": {"kind": "memorizer"},
    "fine_tune_grid": [{"epochs": 1}, {"epochs": 2}]
  })");
}

/// Answers with a constant that depends on the fine-tune epochs.
class EpochBackend final : public backends::Backend {
 public:
  explicit EpochBackend(std::map<std::size_t, std::string> answers) : answers_(std::move(answers)) {}
  backends::BackendKind kind() const override { return backends::BackendKind::scripted; }
  backends::ModelHandle fine_tune(std::span<const prompts::PromptedExample>, const backends::FineTuneSpec& spec) override {
    return {kind(), std::to_string(spec.epochs)};
  }
  std::string complete(const backends::ModelHandle& h, const backends::CompletionRequest&) override {
    return answers_.at(std::stoul(h.model_id));
  }

 private:
  std::map<std::size_t, std::string> answers_;
};

/// Memorizer that records every training set it sees.
class RecordingBackend final : public backends::Backend {
 public:
  explicit RecordingBackend(std::vector<std::vector<prompts::PromptedExample>>& sink)
      : inner_({0, std::nullopt}), sink_(sink) {}
  backends::BackendKind kind() const override { return backends::BackendKind::memorizer; }
  backends::ModelHandle fine_tune(std::span<const prompts::PromptedExample> t, const backends::FineTuneSpec& s) override {
    sink_.emplace_back(t.begin(), t.end());
    return inner_.fine_tune(t, s);
  }
  std::string complete(const backends::ModelHandle& h, const backends::CompletionRequest& r) override {
    return inner_.complete(h, r);
  }

 private:
  backends::MemorizerBackend inner_;
  std::vector<std::vector<prompts::PromptedExample>>& sink_;
};

double majority_accuracy(const TabularDataset& train, const TabularDataset& test) {
  const auto m = baselines::fit(baselines::BaselineKind::mcc, {}, train);
  std::size_t hits = 0;
  for (const auto& l : test.labels()) hits += l == m.majority();
  return 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, DefaultsAndRoundTrip) {
  const auto c = config_from_json(blobs_config());
  EXPECT_EQ(c.mode, Mode::fine_tune);
  EXPECT_EQ(c.fine_tune_grid.size(), 1u);
  EXPECT_EQ(c.repeats, 1u);
  EXPECT_EQ(c.concurrency, 1u);
  EXPECT_EQ(c.prompt_template.decimals, 1);
  const auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

TEST(Config, UnknownKeysRejected) {
  auto j = blobs_config();
  j["epochs"] = 3;
  EXPECT_LIFT_ERROR(config_from_json(j), ErrorCode::config_error);
  j = blobs_config();
  j["backend"]["model"] = "x";
  EXPECT_LIFT_ERROR(config_from_json(j), ErrorCode::config_error);
  j = blobs_config();
  j["template"]["naming"] = "fancy";
  EXPECT_LIFT_ERROR(config_from_json(j), ErrorCode::config_error);
  j = blobs_config();
  j["repeats"] = -1;
  EXPECT_LIFT_ERROR(config_from_json(j), ErrorCode::config_error);
  j = blobs_config();
  j["fine_tune_grid"] = json::array();
  EXPECT_LIFT_ERROR(config_from_json(j), ErrorCode::config_error);
  j = blobs_config();
  j["dataset"]["csv"] = json{{"path", "x.csv"}};
  EXPECT_LIFT_ERROR(config_from_json(j), ErrorCode::config_error);
}

TEST(Config, Overrides) {
  auto j = regression_config();
  apply_override(j, "split.seed=9");
  apply_override(j, "fine_tune_grid.1.epochs=7");
  apply_override(j, "name=renamed run");
  apply_override(j, "calibration.repeats=3");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.split.seed, 9u);
  EXPECT_EQ(c.fine_tune_grid[1].epochs, 7u);
  EXPECT_EQ(c.name, "renamed run");
  ASSERT_TRUE(c.calibration);
  EXPECT_EQ(c.calibration->repeats, 3u);
  EXPECT_LIFT_ERROR(apply_override(j, "noequals"), ErrorCode::config_error);
  EXPECT_LIFT_ERROR(apply_override(j, "fine_tune_grid.5.epochs=1"), ErrorCode::config_error);
  EXPECT_LIFT_ERROR(apply_override(j, "name.inner=1"), ErrorCode::config_error);
}

TEST(Config, EnvInterpolationAndLoad) {
  ::setenv("LIFT_TEST_RUN_NAME", "from-env", 1);
  ::unsetenv("LIFT_TEST_UNSET_VAR");
  auto j = blobs_config();
  j["name"] = "${LIFT_TEST_RUN_NAME}-x";
  EXPECT_EQ(interpolate_env(j)["name"], "from-env-x");
  j["name"] = "${LIFT_TEST_UNSET_VAR}";
  EXPECT_LIFT_ERROR(interpolate_env(j), ErrorCode::config_error);

  testing::TempDir dir;
  j["name"] = "${LIFT_TEST_RUN_NAME}";
  testing::write_file(dir / "c.json", j.dump());
  const auto c = load_config(dir / "c.json", {"seed=77"});
  EXPECT_EQ(c.name, "from-env");
  EXPECT_EQ(c.seed, 77u);
  testing::write_file(dir / "bad.json", "{not json");
  EXPECT_LIFT_ERROR(load_config(dir / "bad.json"), ErrorCode::config_error);
  EXPECT_LIFT_ERROR(load_config(dir / "missing.json"), ErrorCode::io_error);
}

TEST(Config, RelativeCsvResolvesNextToConfig) {
  testing::TempDir dir;
  testing::write_file(dir / "d.csv", "a,y\n1,x\n2,y\n");
  testing::write_file(dir / "c.json", R"({"dataset": {"csv": {"path": "d.csv", "target": "y"}}})");
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.dataset.load().size(), 2u);
}

TEST(Config, SchemaListsEveryTopLevelKey) {
  const auto schema = json::parse(testing::read_file(std::filesystem::path(LIFT_SOURCE_DIR) / "schemas" /
                                                     "experiment_config.schema.json"));
  std::set<std::string> documented;
  for (const auto& [k, _] : schema["properties"].items()) documented.insert(k);
  EXPECT_EQ(documented, std::set<std::string>(config_keys().begin(), config_keys().end()));
  EXPECT_FALSE(schema["additionalProperties"].get<bool>());
}

TEST(Config, BundledConfigsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(LIFT_SOURCE_DIR) / "configs")) {
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_config(entry.path()));
  }
}

// ---------------------------------------------------------------------------
// Pipeline

TEST(Run, RegressionSelectsLowerValidationRae) {
  const auto c = config_from_json(regression_config());
  RunHooks hooks;
  // Epoch 2 answers near the target mean, epoch 1 far away.
  hooks.backend_factory = [](std::uint64_t) {
    return std::make_unique<EpochBackend>(std::map<std::size_t, std::string>{{1, " y=500@@@"}, {2, " y=0@@@"}});
  };
  const auto r = run(c, hooks);
  ASSERT_TRUE(r.ok()) << r.error->message;
  const auto& rr = r.repeats[0];
  ASSERT_EQ(rr.grid.size(), 2u);
  EXPECT_LT(*rr.grid[1].validation_metric, *rr.grid[0].validation_metric);
  EXPECT_EQ(rr.selected, 1u);
  EXPECT_EQ(std::get<double>(rr.predictions[0].prediction.value), 0.0);
}

TEST(Run, ClassificationSelectsHigherValidationAccuracy) {
  auto j = blobs_config();
  j["fine_tune_grid"] = json::array({json{{"epochs", 1}}, json{{"epochs", 2}}, json{{"epochs", 3}}});
  const auto c = config_from_json(j);
  const auto splits = split(c.dataset.load(), c.split);
  std::map<std::string, std::size_t> counts;
  for (const auto& l : splits.validation.labels()) ++counts[l];
  // Epoch 3 always answers the most common validation label.
  std::string best = counts.begin()->first, worst = best;
  for (const auto& [l, n] : counts) {
    if (n > counts[best]) best = l;
    if (n < counts[worst]) worst = l;
  }
  RunHooks hooks;
  hooks.backend_factory = [&](std::uint64_t) {
    return std::make_unique<EpochBackend>(std::map<std::size_t, std::string>{
        {1, " y=" + worst + "@@@"}, {2, " y=" + worst + "@@@"}, {3, " y=" + best + "@@@"}});
  };
  const auto r = run(c, hooks);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.repeats[0].selected, 2u);
}

TEST(Run, SelectionNeverSeesTestData) {
  auto j = blobs_config();
  j["fine_tune_grid"] = json::array({json{{"epochs", 1}}, json{{"epochs", 2}}});
  j["repeats"] = 2;
  for (const char* mode : {"fine_tune", "two_stage", "baseline", "in_context"}) {
    SCOPED_TRACE(mode);
    j["mode"] = mode;
    if (std::string(mode) == "baseline") {
      j["baseline"] = json{{"kind", "knn_classifier"}, {"grid", json::array({json{{"k", 1}}, json{{"k", 5}}})}};
    }
    std::vector<DataAccess> log;
    RunHooks hooks;
    hooks.on_access = [&](const DataAccess& a) { log.push_back(a); };
    const auto r = run(config_from_json(j), hooks);
    ASSERT_TRUE(r.ok()) << r.error->message;
    for (std::size_t rep = 0; rep < 2; ++rep) {
      bool selected = false;
      std::size_t tests = 0;
      for (const auto& a : log) {
        if (a.repeat != rep || a.phase == "split") continue;
        EXPECT_NE(a.phase != "test" && a.split == "test", true) << a.phase;
        if (a.phase == "select") selected = true;
        if (a.phase == "test") {
          EXPECT_TRUE(selected);
          ++tests;
        }
        if (a.phase == "train" || a.phase == "validate") {
          EXPECT_FALSE(selected);
        }
      }
      EXPECT_TRUE(selected);
      EXPECT_EQ(tests, 1u);
    }
  }
}

TEST(Run, MemorizerOnTrainingDataIsPerfect) {
  const auto c = config_from_json(blobs_config());
  auto splits = split(c.dataset.load(), c.split);
  splits.test = splits.train;
  const auto r = run_on_split(c, splits);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r.repeats[0].test.accuracy, 100.0);
  EXPECT_EQ(r.repeats[0].test.fallback_count, 0u);
}

TEST(Run, AllInvalidResponsesGiveMajorityAccuracy) {
  auto j = blobs_config();
  j["backend"] = json{{"kind", "scripted"}, {"responses", json::array({"no idea"})}};
  const auto c = config_from_json(j);
  const auto r = run(c);
  ASSERT_TRUE(r.ok());
  const auto splits = split(c.dataset.load(), c.split);
  EXPECT_DOUBLE_EQ(*r.repeats[0].test.accuracy, majority_accuracy(splits.train, splits.test));
  EXPECT_EQ(r.repeats[0].test.fallback_count, splits.test.size());
  EXPECT_DOUBLE_EQ(r.repeats[0].test.invalid_rate, 1.0);
  for (const auto& p : r.repeats[0].predictions) {
    EXPECT_FALSE(p.prediction.valid);
    EXPECT_EQ(p.prediction.attempts, 5u);
  }
}

TEST(Run, FallbackUsesPerturbedTrainingSet) {
  auto j = blobs_config();
  j["backend"] = json{{"kind", "scripted"}, {"responses", json::array({"?"})}};
  j["train_perturbations"] = json::array({json{{"op", "corrupt_systematic"}, {"fraction", 1.0}}});
  const auto c = config_from_json(j);
  const auto splits = split(c.dataset.load(), c.split);
  const auto shifted = perturb::corrupt_labels_systematic(splits.train, 1.0, 0);
  const auto expected = baselines::fit(baselines::BaselineKind::mcc, {}, shifted).majority();
  ASSERT_NE(expected, baselines::fit(baselines::BaselineKind::mcc, {}, splits.train).majority());
  const auto r = run(c);
  ASSERT_TRUE(r.ok());
  for (const auto& p : r.repeats[0].predictions) EXPECT_EQ(std::get<std::string>(p.prediction.value), expected);
}

TEST(Run, RepeatsReuseSplitAndReseed) {
  auto j = blobs_config();
  j["repeats"] = 3;
  j["train_perturbations"] = json::array({json{{"op", "corrupt_random"}, {"fraction", 0.3}}});
  const auto r = run(config_from_json(j));
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.repeats.size(), 3u);
  std::set<std::uint64_t> seeds;
  for (const auto& rr : r.repeats) {
    seeds.insert(rr.seed);
    EXPECT_EQ(rr.test.n, r.test_size);
  }
  EXPECT_EQ(seeds.size(), 3u);
}

TEST(Run, BaselineMode) {
  auto j = blobs_config(400);
  j["mode"] = "baseline";
  j["baseline"] = json{{"kind", "knn_classifier"}, {"grid", json::array({json{{"k", 1}}, json{{"k", 7}}})}};
  const auto r = run(config_from_json(j));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.method, "baseline/knn_classifier");
  EXPECT_TRUE(r.repeats[0].grid[0].validation_metric);
  EXPECT_GE(*r.repeats[0].test.accuracy, 90.0);
}

TEST(Run, TwoStageRecordsBothJobs) {
  auto j = blobs_config();
  j["mode"] = "two_stage";
  j["fine_tune_grid"] = json::array({json{{"epochs", 10}}});
  testing::TempDir dir;
  j["output_dir"] = (dir / "out").string();
  const auto r = run(config_from_json(j));
  ASSERT_TRUE(r.ok()) << r.error->message;
  const auto jobs = json::parse(testing::read_file(dir / "out" / "jobs.json"));
  ASSERT_EQ(jobs.size(), 2u);
  EXPECT_EQ(jobs[0]["epochs"], 2);
  EXPECT_TRUE(jobs[0]["parent_model"].is_null());
  EXPECT_EQ(jobs[1]["epochs"], 10);
  EXPECT_EQ(jobs[1]["parent_model"], jobs[0]["model_id"]);
  EXPECT_EQ(r.repeats[0].grid[0].model_id, jobs[1]["model_id"]);
}

TEST(Run, ErrorsAreRecordedWithPartialArtifacts) {
  testing::TempDir dir;
  auto j = blobs_config();
  j["output_dir"] = (dir / "a").string();
  RunHooks hooks;
  hooks.backend_factory = [](std::uint64_t) -> std::unique_ptr<backends::Backend> {
    return std::make_unique<backends::ScriptedBackend>(
        [](const backends::CompletionRequest&) -> std::string { throw Error(ErrorCode::transport_error, "down"); });
  };
  const auto r = run(config_from_json(j), hooks);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error->code, "TransportError");
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "train.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "prompts.jsonl"));
  const auto res = json::parse(testing::read_file(dir / "a" / "result.json"));
  EXPECT_EQ(res["error"]["code"], "TransportError");

  auto missing = blobs_config();
  missing["dataset"] = json{{"csv", {{"path", (dir / "nope.csv").string()}}}};
  missing["output_dir"] = (dir / "b").string();
  const auto r2 = run(config_from_json(missing));
  ASSERT_FALSE(r2.ok());
  EXPECT_EQ(r2.error->code, "IoError");
  EXPECT_TRUE(std::filesystem::exists(dir / "b" / "result.json"));
}

TEST(Run, ConcurrencyDoesNotChangeResults) {
  auto j = blobs_config();
  const auto serial = run(config_from_json(j)).to_json();
  j["concurrency"] = 4;
  EXPECT_EQ(run(config_from_json(j)).to_json(), serial);
}

TEST(Run, ReproducibleResultJson) {
  testing::TempDir dir;
  auto j = blobs_config();
  j["repeats"] = 2;
  for (const char* sub : {"one", "two"}) {
    j["output_dir"] = (dir / sub).string();
    ASSERT_TRUE(run(config_from_json(j)).ok());
  }
  EXPECT_EQ(testing::read_file(dir / "one" / "result.json"), testing::read_file(dir / "two" / "result.json"));
  EXPECT_EQ(testing::read_file(dir / "one" / "predictions.jsonl"), testing::read_file(dir / "two" / "predictions.jsonl"));

  j["output_dir"] = (dir / "one").string();
  const auto first = testing::read_file(dir / "one" / "result.json");
  ASSERT_TRUE(run(config_from_json(j)).ok());
  EXPECT_EQ(testing::read_file(dir / "one" / "result.json"), first);
}

TEST(Run, PersistedJsonlReserializesIdentically) {
  testing::TempDir dir;
  // Names with quotes and non-ASCII text exercise JSON escaping.
  std::string csv = "\"width \"\"in\"\"\",höhe,kind\n";
  Rng rng = make_rng(8);
  for (int i = 0; i < 40; ++i) {
    csv += fmt::format("{:.3f},{:.3f},{}\n", testing::uniform(rng, 0, 5), testing::uniform(rng, -1, 1),
                       i % 2 ? "café" : "tea");
  }
  testing::write_file(dir / "named.csv", csv);
  auto j = blobs_config();
  j["dataset"] = json{{"csv", {{"path", (dir / "named.csv").string()}, {"target", "kind"}}}};
  j["template"] = json{{"naming", "correct_names_list"}, {"decimals", 2}};
  j["output_dir"] = (dir / "out").string();
  const auto r = run(config_from_json(j));
  ASSERT_TRUE(r.ok()) << r.error->message;
  const auto text = testing::read_file(dir / "out" / "prompts.jsonl");
  std::istringstream in(text);
  const auto examples = prompts::read_jsonl(in);
  std::ostringstream out;
  prompts::write_jsonl(out, examples);
  EXPECT_EQ(out.str(), text);

  const auto preds = testing::read_file(dir / "out" / "predictions.jsonl");
  std::istringstream lines(preds);
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(json::parse(line).dump(), line);
    ++count;
  }
  EXPECT_GT(count, 0u);
  for (const char* f : {"config.json", "train.csv", "validation.csv", "test.csv", "timing.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
  }
  EXPECT_EQ(testing::read_file(dir / "out" / "result.json").find("timing"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Sweep

TEST(Sweep, NestedPrefixes) {
  auto j = blobs_config(400);
  std::vector<std::vector<prompts::PromptedExample>> seen;
  RunHooks hooks;
  hooks.backend_factory = [&](std::uint64_t) { return std::make_unique<RecordingBackend>(seen); };
  const auto results = sample_complexity_sweep(config_from_json(j), {10, 100, 240}, hooks);
  ASSERT_EQ(results.size(), 3u);
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(results[0].train_size, 10u);
  EXPECT_EQ(results[2].train_size, 240u);
  for (std::size_t s = 0; s + 1 < seen.size(); ++s) {
    // The smaller set is literally a prefix of the larger one.
    ASSERT_LE(seen[s].size(), seen[s + 1].size());
    for (std::size_t i = 0; i < seen[s].size(); ++i) EXPECT_EQ(seen[s][i], seen[s + 1][i]);
  }
  EXPECT_EQ(results[0].test_size, results[2].test_size);
}

TEST(Sweep, EdgeCases) {
  const auto c = config_from_json(blobs_config());
  EXPECT_TRUE(sample_complexity_sweep(c, {}).empty());
  EXPECT_LIFT_ERROR(sample_complexity_sweep(c, {100, 10}), ErrorCode::config_error);
  EXPECT_LIFT_ERROR(sample_complexity_sweep(c, {10, 1000}), ErrorCode::config_error);
}

TEST(Sweep, AcceptsClassificationRangeEndpoints) {
  auto j = blobs_config(1000);
  j["split"] = json{{"train", 0.6}, {"validation", 0.0}, {"test", 0.4}, {"seed", 1}};
  const auto results = sample_complexity_sweep(config_from_json(j), {10, 500});
  ASSERT_EQ(results.size(), 2u);
  EXPECT_TRUE(results[1].ok());
  EXPECT_EQ(results[1].train_size, 500u);
}

// ---------------------------------------------------------------------------
// In-context

// TAE-like: 151 rows, 5 two-digit integer features, 3 classes. Every example
// serializes to the same length, so the budget pins an exact count.
std::filesystem::path write_tae_like(const testing::TempDir& dir) {
  Rng rng = make_rng(42);
  std::string text = "a,b,c,d,e,class\n";
  for (int i = 0; i < 151; ++i) {
    for (int f = 0; f < 5; ++f) text += std::to_string(testing::uniform_int(rng, 10, 99)) + ",";
    text += std::to_string(1 + i % 3) + "\n";
  }
  testing::write_file(dir / "tae.csv", text);
  return dir / "tae.csv";
}

json icl_config(const std::filesystem::path& csv) {
  json j;
  j["name"] = "TAE";
  j["dataset"] = json{{"csv", {{"path", csv.string()}, {"target", "class"}}}};
  j["split"] = json{{"train", 0.8}, {"validation", 0.0}, {"test", 0.2}, {"seed", 1}};
  j["template"] = json{{"decimals", 0}};
  j["mode"] = "in_context";
  j["backend"] = json{{"kind", "scripted"}, {"responses", json::array({" y=1@@@"})}};
  return j;
}

TEST(InContext, BudgetAdmittingFiftyExamples) {
  testing::TempDir dir;
  auto j = icl_config(write_tae_like(dir));
  auto c = config_from_json(j);
  const auto splits = split(c.dataset.load(), c.split);
  const auto examples = prompts::serialize_dataset(splits.train, c.prompt_template);
  const auto query = prompts::serialize_query(splits.test.rows()[0], splits.test.schema(), c.prompt_template);
  const std::span<const prompts::PromptedExample> fifty(examples.data(), 50);
  const auto budget = prompts::build_incontext_prompt(fifty, query, 1'000'000).text.size();
  j["in_context"] = json{{"max_chars", budget}};
  const auto r = run_in_context(config_from_json(j));
  ASSERT_TRUE(r.ok()) << r.error->message;
  EXPECT_EQ(r.repeats[0].prompts_used, 50u);
  for (const auto& p : r.repeats[0].predictions) {
    EXPECT_EQ(p.prompts_used, 50u);
    EXPECT_LE(p.prompt.size(), budget);
  }
  EXPECT_EQ(r.method, "ICL/scripted");
}

TEST(InContext, ZeroBudgetFallsBackToMajority) {
  testing::TempDir dir;
  auto j = icl_config(write_tae_like(dir));
  j["in_context"] = json{{"max_chars", 0}};
  const auto c = config_from_json(j);
  const auto r = run_in_context(c);
  ASSERT_TRUE(r.ok());
  const auto splits = split(c.dataset.load(), c.split);
  EXPECT_EQ(r.repeats[0].prompts_used, 0u);
  EXPECT_EQ(r.repeats[0].test.fallback_count, splits.test.size());
  EXPECT_DOUBLE_EQ(*r.repeats[0].test.accuracy, majority_accuracy(splits.train, splits.test));
}

TEST(InContext, DeterministicModelIsStableAcrossRepeats) {
  testing::TempDir dir;
  auto j = icl_config(write_tae_like(dir));
  j["repeats"] = 3;
  const auto r = run_in_context(config_from_json(j));
  ASSERT_TRUE(r.ok());
  for (const auto& rr : r.repeats) EXPECT_EQ(rr.test.to_json(), r.repeats[0].test.to_json());
  auto wrong_mode = icl_config(dir / "tae.csv");
  wrong_mode["mode"] = "fine_tune";
  EXPECT_LIFT_ERROR(run_in_context(config_from_json(wrong_mode)), ErrorCode::config_error);
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, MeanStdCells) {
  EXPECT_EQ(mean_std_cell(std::vector<double>{80, 81, 82}), "81.00±0.82");
  EXPECT_EQ(mean_std_cell(std::vector<double>{80}), "80.00±0.00");
  EXPECT_EQ(mean_std_cell(std::vector<double>{}), "");
}

TEST(Report, FormatsAndQuoting) {
  ReportRow a;
  a.dataset = "Customers, retail";
  a.method = "LIFT/\"mem\"";
  a.accuracy = {80, 81, 82};
  ReportRow b;
  b.dataset = "Linear";
  b.method = "baseline/linear";
  b.task = TaskKind::regression;
  b.rmse = {0.5};
  b.rae = {0.25};
  const std::vector<ReportRow> rows{a, b};
  EXPECT_EQ(emit_report(rows, ReportFormat::csv),
            "dataset,method,accuracy,rmse,rae,repeats\r\n"
            "\"Customers, retail\",\"LIFT/\"\"mem\"\"\",81.00±0.82,,,3\r\n"
            "Linear,baseline/linear,,0.50±0.00,0.25±0.00,1\r\n");
  const auto md = emit_report(rows, ReportFormat::markdown);
  EXPECT_NE(md.find("| Customers, retail | LIFT/\"mem\" | 81.00±0.82 |  |  | 3 |"), std::string::npos);
  const auto js = json::parse(emit_report(rows, ReportFormat::json));
  EXPECT_EQ(js[1]["rae"], "0.25±0.00");
  EXPECT_LIFT_ERROR(emit_report(std::vector<ReportRow>{}, ReportFormat::csv), ErrorCode::invalid_argument);
  EXPECT_EQ(parse_report_format("md"), ReportFormat::markdown);
  EXPECT_LIFT_ERROR(parse_report_format("xlsx"), ErrorCode::invalid_argument);
}

TEST(Report, FromResultsAndReferences) {
  auto j = blobs_config();
  j["name"] = "9Clusters";
  j["repeats"] = 2;
  const auto r = run(config_from_json(j));
  const auto row = report_row(r.to_json());
  EXPECT_EQ(row.dataset, "9Clusters");
  EXPECT_EQ(row.accuracy.size(), 2u);
  const auto refs = baselines::load_reference_results(std::filesystem::path(LIFT_SOURCE_DIR) / "data" /
                                                      "reference_results.csv");
  const auto published = reference_rows(refs, "9Clusters");
  ASSERT_FALSE(published.empty());
  std::vector<ReportRow> rows{row};
  rows.insert(rows.end(), published.begin(), published.end());
  const auto csv = emit_report(rows, ReportFormat::csv);
  EXPECT_NE(csv.find("9Clusters,published/LIFT/GPT-3,100.00±0.00,,,\r\n"), std::string::npos);
  EXPECT_NE(csv.find("9Clusters,published/MCC,11.25,,,\r\n"), std::string::npos);
}

TEST(Hash, Fnv1a) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace lift::runner
