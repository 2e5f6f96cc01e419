#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/random.hpp"
#include "lift/runner.hpp"

namespace lift::runner {

json hyper_to_json(const baselines::Hyperparameters& h);
json spec_to_json(const backends::FineTuneSpec& s);

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
 public:
  explicit Stopwatch(std::map<std::string, double>& sink, std::string key)
      : sink_(sink), key_(std::move(key)), start_(Clock::now()) {}
  ~Stopwatch() { sink_[key_] += std::chrono::duration<double>(Clock::now() - start_).count(); }

 private:
  std::map<std::string, double>& sink_;
  std::string key_;
  Clock::time_point start_;
};

json target_json(const Target& t) {
  if (const auto* s = std::get_if<std::string>(&t)) return *s;
  return std::get<double>(t);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write {}", path.string()));
  out << text;
}

// Where and how fast a run executes does not change its results.
std::string config_hash(const json& config_json) {
  json j = config_json;
  j.erase("output_dir");
  j.erase("concurrency");
  return fnv1a_hex(j.dump());
}

std::string method_label(const ExperimentConfig& c) {
  if (c.mode == Mode::baseline) return fmt::format("baseline/{}", baselines::to_string(c.baseline.kind));
  const auto backend = backends::to_string(c.backend.kind);
  switch (c.mode) {
    case Mode::fine_tune: return fmt::format("LIFT/{}", backend);
    case Mode::two_stage: return fmt::format("LIFT-2stage/{}", backend);
    case Mode::in_context: return fmt::format("ICL/{}", backend);
    case Mode::baseline: break;
  }
  return "?";
}

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Pipeline {
  const ExperimentConfig& config;
  const DatasetSplits& splits;
  const RunHooks& hooks;
  ExperimentResult& result;

  void touch(const char* phase, const char* split, std::size_t repeat) const {
    if (hooks.on_access) hooks.on_access({phase, split, repeat});
  }

  TabularDataset perturb_train(const TabularDataset& train, std::uint64_t seed) const {
    TabularDataset ds = train;
    for (std::size_t i = 0; i < config.train_perturbations.size(); ++i) {
      const auto& op = config.train_perturbations[i];
      const std::uint64_t s = mix_seed(seed ^ op.seed, 100 + i);
      switch (op.type) {
        case PerturbOp::Type::corrupt_random: ds = perturb::corrupt_labels_random(ds, op.fraction, s); break;
        case PerturbOp::Type::corrupt_systematic: ds = perturb::corrupt_labels_systematic(ds, op.fraction, s); break;
        case PerturbOp::Type::outliers: ds = perturb::inject_outliers(ds, op.fraction, s); break;
        case PerturbOp::Type::augment_gaussian:
          ds = perturb::augment_gaussian(ds, op.epsilon, op.copies, op.clamp, s);
          break;
        case PerturbOp::Type::feature_noise: ds = perturb::perturb_features(ds, {op.noise, op.epsilon, s}); break;
      }
    }
    return ds;
  }

  TabularDataset noisy_test(std::uint64_t seed) const {
    TabularDataset ds = splits.test;
    for (std::size_t i = 0; i < config.test_noise.size(); ++i) {
      auto spec = config.test_noise[i];
      spec.seed = mix_seed(seed ^ spec.seed, 200 + i);
      ds = perturb::perturb_features(ds, spec);
    }
    return ds;
  }

  parse::InferenceSettings settings(const TabularDataset& train) const {
    parse::InferenceSettings s;
    s.task = train.task();
    s.label_set = train.label_set();
    s.fallback = parse::fallback_for(train);
    s.retry = config.retry;
    s.parse.end_token = config.prompt_template.end_token;
    s.parse.answer_prefix = config.prompt_template.answer_prefix;
    s.max_tokens = config.max_tokens;
    return s;
  }

  std::vector<PredictionRecord> predict_lm(const parse::CompletionSource& source, const TabularDataset& ds,
                                           const parse::InferenceSettings& s) const {
    const auto queries = prompts::serialize_queries(ds, config.prompt_template);
    std::vector<PredictionRecord> out(ds.size());
    parallel_for(ds.size(), config.concurrency, [&](std::size_t i) {
      out[i].row = i;
      out[i].prompt = queries[i];
      out[i].truth = ds.targets()[i];
      out[i].prediction = parse::infer_with_retry(source, queries[i], s);
    });
    return out;
  }

  eval::MetricReport score(const std::vector<PredictionRecord>& preds, const TabularDataset& ds,
                           const parse::InferenceSettings& s) const {
    std::size_t fallbacks = 0;
    for (const auto& p : preds) fallbacks += p.prediction.used_fallback;
    eval::MetricReport r;
    if (ds.task() == TaskKind::regression) {
      std::vector<double> pred;
      for (const auto& p : preds) pred.push_back(std::get<double>(p.prediction.value));
      const auto truth = ds.values();
      r = eval::regression_metrics(pred, truth);
    } else {
      std::vector<std::string> pred;
      for (const auto& p : preds) pred.push_back(std::get<std::string>(p.prediction.value));
      const auto truth = ds.labels();
      std::vector<std::string> universe = s.label_set;
      for (const auto& l : ds.label_set()) {
        if (std::find(universe.begin(), universe.end(), l) == universe.end()) universe.push_back(l);
      }
      std::optional<std::string> fallback;
      if (const auto* f = std::get_if<std::string>(&s.fallback)) fallback = *f;
      r = eval::classification_metrics(pred, truth, config.positive_label, universe, fallback);
    }
    r.set_fallbacks(fallbacks);
    return r;
  }

  double validation_metric(const eval::MetricReport& r) const { return r.accuracy ? *r.accuracy : *r.rae; }

  bool better(double candidate, double incumbent) const {
    return splits.train.task() == TaskKind::classification ? candidate > incumbent : candidate < incumbent;
  }

  std::size_t select(const std::vector<GridPointResult>& grid, std::size_t repeat) const {
    touch("select", "", repeat);
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      if (grid[g].validation_metric && grid[best].validation_metric &&
          better(*grid[g].validation_metric, *grid[best].validation_metric)) {
        best = g;
      }
    }
    return best;
  }

  void run_lm(RepeatResult& rr, const TabularDataset& train, backends::Backend& backend) const {
    const auto s = settings(train);
    const auto examples = prompts::serialize_dataset(train, config.prompt_template);
    if (config.output_dir && rr.repeat == 0) prompts::save_jsonl(*config.output_dir / "prompts.jsonl", examples);

    std::vector<prompts::PromptedExample> pretext_examples;
    if (config.mode == Mode::two_stage) {
      synth::PretextSpec ps;
      ps.p = train.p();
      ps.task = train.task();
      ps.labels = train.label_set();
      if (train.task() == TaskKind::regression) {
        const auto y = train.values();
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        ps.target_low = *lo;
        ps.target_high = *hi > *lo ? *hi : *lo + 1.0;
      }
      ps.per_cluster = config.two_stage.per_cluster;
      ps.regression_n = config.two_stage.regression_n;
      ps.seed = mix_seed(rr.seed, 300);
      const auto raw = synth::gen_pretext(ps);
      // Same schema as the target so named templates serialize identically.
      const TabularDataset pretext(train.schema(), raw.rows(), raw.targets(), raw.task(), raw.label_set());
      pretext_examples = prompts::serialize_dataset(pretext, config.prompt_template);
    }

    std::vector<backends::ModelHandle> handles;
    for (std::size_t g = 0; g < config.fine_tune_grid.size(); ++g) {
      const auto& spec = config.fine_tune_grid[g];
      touch("train", "train", rr.repeat);
      backends::ModelHandle h;
      {
        Stopwatch sw(result.timing, "fine_tune");
        if (config.mode == Mode::two_stage) {
          backends::FineTuneSpec pre = spec;
          pre.epochs = config.two_stage.pretext_epochs;
          h = backends::two_stage_fine_tune(backend, pretext_examples, examples, pre, spec);
        } else {
          h = backend.fine_tune(examples, spec);
        }
      }
      GridPointResult gp{g, spec_to_json(spec), std::nullopt, h.model_id};
      if (!splits.validation.empty() && config.fine_tune_grid.size() > 1) {
        touch("validate", "validation", rr.repeat);
        Stopwatch sw(result.timing, "validate");
        const auto preds = predict_lm(parse::bind(backend, h), splits.validation, s);
        gp.validation_metric = validation_metric(score(preds, splits.validation, s));
      }
      rr.grid.push_back(std::move(gp));
      handles.push_back(h);
    }
    rr.selected = select(rr.grid, rr.repeat);

    touch("test", "test", rr.repeat);
    const auto test = noisy_test(rr.seed);
    {
      Stopwatch sw(result.timing, "predict_test");
      rr.predictions = predict_lm(parse::bind(backend, handles[rr.selected]), test, s);
    }
    rr.test = score(rr.predictions, test, s);

    if (config.calibration && train.task() == TaskKind::regression && train.p() == 1) {
      Stopwatch sw(result.timing, "calibration");
      auto cs = s;
      cs.retry.initial_temperature = config.calibration->temperature;
      cs.retry.escalation_temperature = config.calibration->temperature;
      const auto source = parse::bind(backend, handles[rr.selected]);
      const auto queries = prompts::serialize_queries(test, config.prompt_template);
      std::vector<double> xs;
      std::map<double, std::size_t> index;
      for (std::size_t i = 0; i < test.size(); ++i) {
        xs.push_back(test.rows()[i][0]);
        index.emplace(test.rows()[i][0], i);
      }
      eval::CalibrationOptions opts;
      opts.repeats = config.calibration->repeats;
      opts.bins = config.calibration->bins;
      if (config.dataset.synth && config.dataset.synth->type == SynthSource::Type::heteroscedastic) {
        opts.reference_sigma = synth::heteroscedastic_sigma;
      }
      rr.calibration = eval::calibration_profile(
          [&](double x, std::size_t) {
            return std::get<double>(parse::infer_with_retry(source, queries[index.at(x)], cs).value);
          },
          xs, opts);
    }
  }

  void run_icl(RepeatResult& rr, const TabularDataset& train, backends::Backend& backend) const {
    const auto s = settings(train);
    touch("train", "train", rr.repeat);
    // Demonstrations in a seeded order; the subset is the longest prefix
    // that fits next to the longest test query.
    auto examples = prompts::serialize_dataset(train, config.prompt_template);
    auto rng = make_rng(rr.seed, 400);
    std::shuffle(examples.begin(), examples.end(), rng);
    rr.grid.push_back({0, json{{"max_chars", config.in_context.max_chars}, {"base_model", config.in_context.base_model}},
                       std::nullopt, config.in_context.base_model});
    rr.selected = select(rr.grid, rr.repeat);

    touch("test", "test", rr.repeat);
    const auto test = noisy_test(rr.seed);
    const auto queries = prompts::serialize_queries(test, config.prompt_template);
    std::string_view longest;
    for (const auto& q : queries) {
      if (q.size() > longest.size()) longest = q;
    }
    std::size_t k = 0;
    try {
      k = prompts::build_incontext_prompt(examples, longest, config.in_context.max_chars, config.in_context.separator)
              .examples_used;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::query_too_long) throw;
    }
    rr.prompts_used = k;
    const std::span<const prompts::PromptedExample> demos(examples.data(), k);

    const auto handle = backend.base_model(config.in_context.base_model);
    const auto source = parse::bind(backend, handle);
    rr.predictions.resize(test.size());
    Stopwatch sw(result.timing, "predict_test");
    parallel_for(test.size(), config.concurrency, [&](std::size_t i) {
      auto& rec = rr.predictions[i];
      rec.row = i;
      rec.truth = test.targets()[i];
      try {
        const auto prompt =
            prompts::build_incontext_prompt(demos, queries[i], config.in_context.max_chars, config.in_context.separator);
        rec.prompt = prompt.text;
        rec.prompts_used = prompt.examples_used;
        rec.prediction = parse::infer_with_retry(source, prompt.text, s);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::query_too_long) throw;
        rec.prompt = queries[i];
        rec.prompts_used = 0;
        rec.prediction.value = s.fallback;
        rec.prediction.used_fallback = true;
      }
    });
    rr.test = score(rr.predictions, test, s);
  }

  void run_baseline(RepeatResult& rr, const TabularDataset& train) const {
    const auto s = settings(train);
    std::vector<baselines::FittedBaseline> models;
    for (std::size_t g = 0; g < config.baseline.grid.size(); ++g) {
      touch("train", "train", rr.repeat);
      models.push_back(baselines::fit(config.baseline.kind, config.baseline.grid[g], train));
      GridPointResult gp{g, hyper_to_json(config.baseline.grid[g]), std::nullopt, ""};
      if (!splits.validation.empty() && config.baseline.grid.size() > 1) {
        touch("validate", "validation", rr.repeat);
        gp.validation_metric = validation_metric(score(predict_fitted(models.back(), splits.validation), splits.validation, s));
      }
      rr.grid.push_back(std::move(gp));
    }
    rr.selected = select(rr.grid, rr.repeat);
    touch("test", "test", rr.repeat);
    const auto test = noisy_test(rr.seed);
    rr.predictions = predict_fitted(models[rr.selected], test);
    rr.test = score(rr.predictions, test, s);
  }

  std::vector<PredictionRecord> predict_fitted(const baselines::FittedBaseline& m, const TabularDataset& ds) const {
    const auto values = m.predict(ds.rows());
    std::vector<PredictionRecord> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      out[i].row = i;
      out[i].truth = ds.targets()[i];
      out[i].prediction.value = values[i];
      out[i].prediction.valid = true;
      out[i].prediction.attempts = 1;
    }
    return out;
  }
};

json prediction_json(const PredictionRecord& p, std::size_t repeat) {
  json j;
  j["repeat"] = repeat;
  j["row"] = p.row;
  j["prompt"] = p.prompt;
  j["truth"] = target_json(p.truth);
  j["value"] = target_json(p.prediction.value);
  j["valid"] = p.prediction.valid;
  j["attempts"] = p.prediction.attempts;
  j["used_fallback"] = p.prediction.used_fallback;
  j["raw_texts"] = p.prediction.raw_texts;
  j["temperatures"] = p.prediction.temperatures;
  json reasons = json::array();
  for (auto r : p.prediction.reasons) reasons.push_back(std::string(parse::to_string(r)));
  j["invalid_reasons"] = reasons;
  if (p.prompts_used) j["prompts_used"] = *p.prompts_used;
  return j;
}

void write_artifacts(const ExperimentConfig& config, const ExperimentResult& result,
                     const std::vector<backends::JobRecord>& jobs) {
  if (!config.output_dir) return;
  const auto& dir = *config.output_dir;
  write_text(dir / "result.json", result.to_json().dump(2) + "\n");

  json timing = json::object();
  for (const auto& [k, v] : result.timing) timing[k] = v;
  write_text(dir / "timing.json", timing.dump(2) + "\n");

  json jj = json::array();
  for (const auto& job : jobs) {
    json o{{"job_id", job.job_id}, {"model_id", job.model_id}};
    o["parent_model"] = job.parent_model ? json(*job.parent_model) : json(nullptr);
    o["base_model"] = job.base_model;
    o["epochs"] = job.epochs;
    o["learning_rate_multiplier"] = job.learning_rate_multiplier ? json(*job.learning_rate_multiplier) : json(nullptr);
    o["batch_size"] = job.batch_size ? json(*job.batch_size) : json(nullptr);
    o["n_examples"] = job.n_examples;
    o["status"] = job.status;
    jj.push_back(o);
  }
  write_text(dir / "jobs.json", jj.dump(2) + "\n");

  std::string lines;
  for (const auto& rr : result.repeats) {
    for (const auto& p : rr.predictions) lines += prediction_json(p, rr.repeat).dump() + "\n";
  }
  write_text(dir / "predictions.jsonl", lines);

  for (const auto& rr : result.repeats) {
    if (rr.calibration.empty()) continue;
    std::ofstream out(dir / (rr.repeat == 0 ? std::string("calibration.csv") : fmt::format("calibration_{}.csv", rr.repeat)));
    eval::write_calibration_csv(out, rr.calibration);
  }
}

}  // namespace

json ExperimentResult::to_json() const {
  json j;
  j["name"] = name;
  j["dataset"] = dataset;
  j["method"] = method;
  j["config_hash"] = config_hash;
  j["task"] = std::string(lift::to_string(task));
  j["sizes"] = json{{"train", train_size}, {"validation", validation_size}, {"test", test_size}};
  json reps = json::array();
  for (const auto& r : repeats) {
    json rj;
    rj["repeat"] = r.repeat;
    rj["seed"] = r.seed;
    json grid = json::array();
    for (const auto& g : r.grid) {
      json gj{{"index", g.index}, {"spec", g.spec}};
      gj["validation_metric"] = g.validation_metric ? json(*g.validation_metric) : json(nullptr);
      gj["model_id"] = g.model_id;
      grid.push_back(gj);
    }
    rj["grid"] = grid;
    rj["selected"] = r.selected;
    rj["test"] = r.test.to_json();
    if (r.prompts_used) rj["prompts_used"] = *r.prompts_used;
    reps.push_back(rj);
  }
  j["repeats"] = reps;
  if (error) j["error"] = json{{"code", error->code}, {"message", error->message}};
  return j;
}

ExperimentResult run_on_split(const ExperimentConfig& config, const DatasetSplits& splits, const RunHooks& hooks) {
  config.validate();
  ExperimentResult result;
  const auto config_json = config_to_json(config);
  result.name = config.name;
  result.dataset = config.dataset.label();
  result.method = method_label(config);
  result.config_hash = config_hash(config_json);
  result.task = splits.train.task();
  result.train_size = splits.train.size();
  result.validation_size = splits.validation.size();
  result.test_size = splits.test.size();

  std::vector<backends::JobRecord> jobs;
  if (config.output_dir) {
    std::filesystem::create_directories(*config.output_dir);
    write_text(*config.output_dir / "config.json", config_json.dump(2) + "\n");
    save_csv(splits.train, *config.output_dir / "train.csv");
    save_csv(splits.validation, *config.output_dir / "validation.csv");
    save_csv(splits.test, *config.output_dir / "test.csv");
  }

  Pipeline pipe{config, splits, hooks, result};
  try {
    for (std::size_t r = 0; r < config.repeats; ++r) {
      RepeatResult rr;
      rr.repeat = r;
      rr.seed = mix_seed(config.seed, r);
      const auto train = pipe.perturb_train(splits.train, rr.seed);
      if (train.empty()) throw Error(ErrorCode::empty_training_set, "training split is empty");
      if (config.mode == Mode::baseline) {
        pipe.run_baseline(rr, train);
      } else {
        auto backend = hooks.backend_factory ? hooks.backend_factory(rr.seed) : make_backend(config.backend, rr.seed);
        if (config.mode == Mode::in_context) pipe.run_icl(rr, train, *backend);
        else pipe.run_lm(rr, train, *backend);
        const auto js = backend->jobs();
        jobs.insert(jobs.end(), js.begin(), js.end());
      }
      result.repeats.push_back(std::move(rr));
    }
  } catch (const Error& e) {
    result.error = ErrorInfo{std::string(to_string(e.code())), e.what()};
  }
  write_artifacts(config, result, jobs);
  return result;
}

ExperimentResult run(const ExperimentConfig& config, const RunHooks& hooks) {
  config.validate();
  DatasetSplits splits;
  try {
    splits = split(config.dataset.load(), config.split);
  } catch (const Error& e) {
    ExperimentResult result;
    result.name = config.name;
    result.dataset = config.dataset.label();
    result.method = method_label(config);
    result.config_hash = config_hash(config_to_json(config));
    result.error = ErrorInfo{std::string(to_string(e.code())), e.what()};
    if (config.output_dir) {
      std::filesystem::create_directories(*config.output_dir);
      write_text(*config.output_dir / "config.json", config_to_json(config).dump(2) + "\n");
      write_text(*config.output_dir / "result.json", result.to_json().dump(2) + "\n");
    }
    return result;
  }
  if (hooks.on_access) hooks.on_access({"split", "", 0});
  return run_on_split(config, splits, hooks);
}

ExperimentResult run_in_context(const ExperimentConfig& config, const RunHooks& hooks) {
  if (config.mode != Mode::in_context) throw Error(ErrorCode::config_error, "run_in_context needs mode in_context");
  return run(config, hooks);
}

std::vector<ExperimentResult> sample_complexity_sweep(const ExperimentConfig& config,
                                                      const std::vector<std::size_t>& sizes,
                                                      const RunHooks& hooks) {
  if (sizes.empty()) return {};
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] < sizes[i - 1]) throw Error(ErrorCode::config_error, "sweep sizes must be ascending");
  }
  const auto splits = split(config.dataset.load(), config.split);
  if (sizes.back() > splits.train.size()) {
    throw Error(ErrorCode::config_error,
                fmt::format("sweep size {} exceeds the {} training rows", sizes.back(), splits.train.size()));
  }
  std::vector<std::size_t> order(splits.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(config.seed, 500);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<ExperimentResult> out;
  for (std::size_t m : sizes) {
    DatasetSplits sub = splits;
    const std::vector<std::size_t> prefix(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    sub.train = splits.train.subset(prefix);
    sub.train_indices.clear();
    for (std::size_t i : prefix) sub.train_indices.push_back(splits.train_indices[i]);
    ExperimentConfig c = config;
    if (config.output_dir) c.output_dir = *config.output_dir / fmt::format("n{}", m);
    out.push_back(run_on_split(c, sub, hooks));
  }
  return out;
}

}  // namespace lift::runner
