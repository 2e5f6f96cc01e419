#include <cstdlib>
#include <fstream>
#include <regex>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/image.hpp"
#include "lift/runner.hpp"
#include "lift/text.hpp"

namespace lift::runner {

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::config_error, message); }

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) config_error(fmt::format("{} must be an object", where));
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) config_error(fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <class T>
T get(const json& obj, const char* key, T fallback, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (it->is_number_integer() && it->template get<long long>() < 0) throw std::invalid_argument("negative");
    }
    return it->template get<T>();
  } catch (const std::exception&) {
    config_error(fmt::format("{}.{} has the wrong type", where, key));
  }
}

template <class T>
std::optional<T> get_opt(const json& obj, const char* key, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return get<T>(obj, key, T{}, where);
}

template <class F>
auto wrap(std::string_view where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_error) throw;
    config_error(fmt::format("{}: {}", where, e.what()));
  }
}

CsvSource csv_from_json(const json& j) {
  check_keys(j, {"path", "task", "target", "header", "image", "crop", "unit_scale"}, "dataset.csv");
  CsvSource s;
  s.path = get<std::string>(j, "path", "", "dataset.csv");
  if (s.path.empty()) config_error("dataset.csv.path is required");
  s.options.task = wrap("dataset.csv.task", [&] { return parse_task_kind(get<std::string>(j, "task", "classification", "dataset.csv")); });
  if (j.contains("target")) {
    if (j["target"].is_string()) s.options.target_column = j["target"].get<std::string>();
    else s.options.target_column = get<std::size_t>(j, "target", 0, "dataset.csv");
  }
  s.options.has_header = get<bool>(j, "header", true, "dataset.csv");
  s.image = get<bool>(j, "image", false, "dataset.csv");
  s.image_crop = get<bool>(j, "crop", true, "dataset.csv");
  s.image_unit_scale = get<bool>(j, "unit_scale", false, "dataset.csv");
  return s;
}

SynthSource synth_from_json(const json& j) {
  check_keys(j, {"type", "function", "shape", "p", "n", "sigma", "noise", "seed"}, "dataset.synth");
  SynthSource s;
  const auto type = get<std::string>(j, "type", "classification", "dataset.synth");
  if (type == "regression") s.type = SynthSource::Type::regression;
  else if (type == "classification") s.type = SynthSource::Type::classification;
  else if (type == "heteroscedastic") s.type = SynthSource::Type::heteroscedastic;
  else config_error(fmt::format("unknown dataset.synth.type '{}'", type));
  s.function = wrap("dataset.synth.function",
                    [&] { return synth::parse_function_kind(get<std::string>(j, "function", "linear", "dataset.synth")); });
  s.shape = wrap("dataset.synth.shape",
                 [&] { return synth::parse_shape(get<std::string>(j, "shape", "blobs", "dataset.synth")); });
  s.p = get<std::size_t>(j, "p", 1, "dataset.synth");
  s.n = get<std::size_t>(j, "n", 0, "dataset.synth");
  s.sigma = get<double>(j, "sigma", 0.1, "dataset.synth");
  s.noise = get<double>(j, "noise", 0.1, "dataset.synth");
  s.seed = get<std::uint64_t>(j, "seed", 0, "dataset.synth");
  if (s.n == 0) config_error("dataset.synth.n must be positive");
  return s;
}

json synth_to_json(const SynthSource& s) {
  json j;
  switch (s.type) {
    case SynthSource::Type::regression:
      j["type"] = "regression";
      j["function"] = std::string(synth::to_string(s.function));
      j["p"] = s.p;
      j["sigma"] = s.sigma;
      break;
    case SynthSource::Type::heteroscedastic:
      j["type"] = "heteroscedastic";
      j["function"] = std::string(synth::to_string(s.function));
      break;
    case SynthSource::Type::classification:
      j["type"] = "classification";
      j["shape"] = std::string(synth::to_string(s.shape));
      j["noise"] = s.noise;
      break;
  }
  j["n"] = s.n;
  j["seed"] = s.seed;
  return j;
}

prompts::PromptTemplate template_from_json(const json& j) {
  check_keys(j,
             {"naming", "shuffle_seed", "sentence", "qa_separator", "end_token", "decimals", "question_suffix",
              "answer_prefix"},
             "template");
  prompts::PromptTemplate t;
  t.naming = wrap("template.naming",
                  [&] { return prompts::parse_naming_mode(get<std::string>(j, "naming", "generic", "template")); });
  t.shuffle_seed = get<std::uint64_t>(j, "shuffle_seed", 0, "template");
  t.sentence_template = get<std::string>(j, "sentence", "", "template");
  t.qa_separator = get<std::string>(j, "qa_separator", t.qa_separator, "template");
  t.end_token = get<std::string>(j, "end_token", t.end_token, "template");
  t.decimals = get<int>(j, "decimals", t.decimals, "template");
  t.question_suffix = get_opt<std::string>(j, "question_suffix", "template");
  t.answer_prefix = get<std::string>(j, "answer_prefix", t.answer_prefix, "template");
  wrap("template", [&] { t.validate(); return 0; });
  return t;
}

json template_to_json(const prompts::PromptTemplate& t) {
  json j;
  j["naming"] = std::string(prompts::to_string(t.naming));
  j["shuffle_seed"] = t.shuffle_seed;
  j["sentence"] = t.sentence_template;
  j["qa_separator"] = t.qa_separator;
  j["end_token"] = t.end_token;
  j["decimals"] = t.decimals;
  if (t.question_suffix) j["question_suffix"] = *t.question_suffix;
  j["answer_prefix"] = t.answer_prefix;
  return j;
}

backends::BackendKind parse_backend_kind(std::string_view s) {
  if (s == "http") return backends::BackendKind::http;
  if (s == "memorizer") return backends::BackendKind::memorizer;
  if (s == "scripted") return backends::BackendKind::scripted;
  config_error(fmt::format("unknown backend kind '{}'", s));
}

BackendConfig backend_from_json(const json& j) {
  check_keys(j, {"kind", "seed", "store_dir", "http", "responses", "cycle"}, "backend");
  BackendConfig b;
  b.kind = parse_backend_kind(get<std::string>(j, "kind", "memorizer", "backend"));
  b.seed = get<std::uint64_t>(j, "seed", 0, "backend");
  if (auto dir = get_opt<std::string>(j, "store_dir", "backend")) b.store_dir = *dir;
  b.responses = get<std::vector<std::string>>(j, "responses", {}, "backend");
  b.cycle = get<bool>(j, "cycle", true, "backend");
  if (j.contains("http")) {
    const auto& h = j["http"];
    check_keys(h,
               {"base_url", "api_prefix", "api_key_env", "requests_per_minute", "burst", "max_retries",
                "backoff_initial_s", "backoff_max_s", "poll_interval_s", "poll_timeout_s", "connect_timeout_s",
                "read_timeout_s", "supports_continuation"},
               "backend.http");
    auto& o = b.http;
    o.base_url = get<std::string>(h, "base_url", o.base_url, "backend.http");
    o.api_prefix = get<std::string>(h, "api_prefix", o.api_prefix, "backend.http");
    o.api_key_env = get<std::string>(h, "api_key_env", o.api_key_env, "backend.http");
    o.requests_per_minute = get<double>(h, "requests_per_minute", o.requests_per_minute, "backend.http");
    o.burst = get<double>(h, "burst", o.burst, "backend.http");
    o.max_retries = get<std::size_t>(h, "max_retries", o.max_retries, "backend.http");
    o.backoff_initial_s = get<double>(h, "backoff_initial_s", o.backoff_initial_s, "backend.http");
    o.backoff_max_s = get<double>(h, "backoff_max_s", o.backoff_max_s, "backend.http");
    o.poll_interval_s = get<double>(h, "poll_interval_s", o.poll_interval_s, "backend.http");
    o.poll_timeout_s = get<double>(h, "poll_timeout_s", o.poll_timeout_s, "backend.http");
    o.connect_timeout_s = get<double>(h, "connect_timeout_s", o.connect_timeout_s, "backend.http");
    o.read_timeout_s = get<double>(h, "read_timeout_s", o.read_timeout_s, "backend.http");
    o.supports_continuation = get<bool>(h, "supports_continuation", o.supports_continuation, "backend.http");
  }
  return b;
}

json backend_to_json(const BackendConfig& b) {
  json j;
  j["kind"] = std::string(backends::to_string(b.kind));
  j["seed"] = b.seed;
  if (b.store_dir) j["store_dir"] = b.store_dir->string();
  if (b.kind == backends::BackendKind::scripted) {
    j["responses"] = b.responses;
    j["cycle"] = b.cycle;
  }
  if (b.kind == backends::BackendKind::http) {
    const auto& o = b.http;
    j["http"] = json{{"base_url", o.base_url},
                     {"api_prefix", o.api_prefix},
                     {"api_key_env", o.api_key_env},
                     {"requests_per_minute", o.requests_per_minute},
                     {"burst", o.burst},
                     {"max_retries", o.max_retries},
                     {"backoff_initial_s", o.backoff_initial_s},
                     {"backoff_max_s", o.backoff_max_s},
                     {"poll_interval_s", o.poll_interval_s},
                     {"poll_timeout_s", o.poll_timeout_s},
                     {"connect_timeout_s", o.connect_timeout_s},
                     {"read_timeout_s", o.read_timeout_s},
                     {"supports_continuation", o.supports_continuation}};
  }
  return j;
}

backends::FineTuneSpec fine_tune_from_json(const json& j, std::string_view where) {
  check_keys(j, {"epochs", "learning_rate_multiplier", "base_model", "batch_size"}, where);
  backends::FineTuneSpec s;
  s.epochs = get<std::size_t>(j, "epochs", s.epochs, where);
  s.learning_rate_multiplier = get_opt<double>(j, "learning_rate_multiplier", where);
  s.base_model = get<std::string>(j, "base_model", s.base_model, where);
  s.batch_size = get_opt<std::size_t>(j, "batch_size", where);
  wrap(where, [&] { s.validate(); return 0; });
  return s;
}

json fine_tune_to_json(const backends::FineTuneSpec& s) {
  json j;
  j["epochs"] = s.epochs;
  if (s.learning_rate_multiplier) j["learning_rate_multiplier"] = *s.learning_rate_multiplier;
  j["base_model"] = s.base_model;
  if (s.batch_size) j["batch_size"] = *s.batch_size;
  return j;
}

PerturbOp perturb_from_json(const json& j, std::string_view where) {
  check_keys(j, {"op", "fraction", "epsilon", "copies", "clamp", "noise", "seed"}, where);
  PerturbOp op;
  const auto name = get<std::string>(j, "op", "", where);
  if (name == "corrupt_random") op.type = PerturbOp::Type::corrupt_random;
  else if (name == "corrupt_systematic") op.type = PerturbOp::Type::corrupt_systematic;
  else if (name == "outliers") op.type = PerturbOp::Type::outliers;
  else if (name == "augment_gaussian") op.type = PerturbOp::Type::augment_gaussian;
  else if (name == "feature_noise") op.type = PerturbOp::Type::feature_noise;
  else config_error(fmt::format("{}: unknown op '{}'", where, name));
  op.fraction = get<double>(j, "fraction", 0.0, where);
  op.epsilon = get<double>(j, "epsilon", 0.0, where);
  op.copies = get<std::size_t>(j, "copies", 1, where);
  if (auto c = get_opt<std::vector<double>>(j, "clamp", where)) {
    if (c->size() != 2) config_error(fmt::format("{}.clamp needs [lo, hi]", where));
    op.clamp = std::pair{(*c)[0], (*c)[1]};
  }
  op.noise = wrap(where, [&] { return perturb::parse_noise_kind(get<std::string>(j, "noise", "gaussian_linf", where)); });
  op.seed = get<std::uint64_t>(j, "seed", 0, where);
  return op;
}

json perturb_to_json(const PerturbOp& op) {
  static const char* names[] = {"corrupt_random", "corrupt_systematic", "outliers", "augment_gaussian",
                                "feature_noise"};
  json j;
  j["op"] = names[static_cast<int>(op.type)];
  switch (op.type) {
    case PerturbOp::Type::corrupt_random:
    case PerturbOp::Type::corrupt_systematic:
    case PerturbOp::Type::outliers: j["fraction"] = op.fraction; break;
    case PerturbOp::Type::augment_gaussian:
      j["epsilon"] = op.epsilon;
      j["copies"] = op.copies;
      if (op.clamp) j["clamp"] = {op.clamp->first, op.clamp->second};
      break;
    case PerturbOp::Type::feature_noise:
      j["epsilon"] = op.epsilon;
      j["noise"] = std::string(perturb::to_string(op.noise));
      break;
  }
  j["seed"] = op.seed;
  return j;
}

baselines::Hyperparameters hyper_from_json(const json& j, std::string_view where) {
  check_keys(j, {"k", "p", "aggregator", "learning_rate", "iterations", "standardize"}, where);
  baselines::Hyperparameters h;
  h.k = get<std::size_t>(j, "k", h.k, where);
  h.minkowski_p = get<double>(j, "p", h.minkowski_p, where);
  h.aggregator = wrap(where, [&] { return baselines::parse_aggregator(get<std::string>(j, "aggregator", "mean", where)); });
  h.learning_rate = get<double>(j, "learning_rate", h.learning_rate, where);
  h.iterations = get<std::size_t>(j, "iterations", h.iterations, where);
  h.standardize = get<bool>(j, "standardize", h.standardize, where);
  wrap(where, [&] { h.validate(); return 0; });
  return h;
}

}  // namespace

json hyper_to_json(const baselines::Hyperparameters& h) {
  return json{{"k", h.k},
              {"p", h.minkowski_p},
              {"aggregator", std::string(baselines::to_string(h.aggregator))},
              {"learning_rate", h.learning_rate},
              {"iterations", h.iterations},
              {"standardize", h.standardize}};
}

json spec_to_json(const backends::FineTuneSpec& s) { return fine_tune_to_json(s); }

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::fine_tune: return "fine_tune";
    case Mode::two_stage: return "two_stage";
    case Mode::in_context: return "in_context";
    case Mode::baseline: return "baseline";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  for (auto m : {Mode::fine_tune, Mode::two_stage, Mode::in_context, Mode::baseline}) {
    if (text == to_string(m)) return m;
  }
  config_error(fmt::format("unknown mode '{}'", text));
}

TabularDataset DatasetSource::load() const {
  if (csv) {
    auto ds = load_csv(csv->path, csv->options);
    if (csv->image) ds = image::prepare_images(ds, csv->image_crop, csv->image_unit_scale);
    return ds;
  }
  const auto& s = *synth;
  switch (s.type) {
    case SynthSource::Type::regression:
      return synth::gen_regression({s.function, s.p, s.n, s.sigma, -10.0, 10.0, true, s.seed});
    case SynthSource::Type::heteroscedastic: return synth::gen_heteroscedastic(s.function, s.n, s.seed);
    case SynthSource::Type::classification: return synth::gen_classification({s.shape, s.n, s.noise, s.seed});
  }
  throw Error(ErrorCode::config_error, "no dataset source");
}

std::string DatasetSource::label() const {
  if (csv) return csv->path.stem().string();
  switch (synth->type) {
    case SynthSource::Type::regression: return fmt::format("{}-p{}", synth::to_string(synth->function), synth->p);
    case SynthSource::Type::heteroscedastic: return fmt::format("{}-hetero", synth::to_string(synth->function));
    case SynthSource::Type::classification: return std::string(synth::to_string(synth->shape));
  }
  return "dataset";
}

void ExperimentConfig::validate() const {
  if (dataset.csv.has_value() == dataset.synth.has_value()) config_error("exactly one dataset source is required");
  wrap("split", [&] { split.validate(); return 0; });
  wrap("template", [&] { prompt_template.validate(); return 0; });
  wrap("retry", [&] { retry.validate(); return 0; });
  if ((mode == Mode::fine_tune || mode == Mode::two_stage) && fine_tune_grid.empty()) {
    config_error("fine_tune_grid must be non-empty");
  }
  if (mode == Mode::baseline && baseline.grid.empty()) config_error("baseline.grid must be non-empty");
  if (repeats < 1) config_error("repeats must be >= 1");
  if (concurrency < 1) config_error("concurrency must be >= 1");
  if (max_tokens < 1) config_error("max_tokens must be >= 1");
  if (two_stage.pretext_epochs < 1) config_error("two_stage.pretext_epochs must be >= 1");
  if (calibration && calibration->repeats < 2) config_error("calibration.repeats must be >= 2");
  if (backend.kind == backends::BackendKind::scripted && backend.responses.empty()) {
    config_error("scripted backend needs responses");
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "name",        "seed",       "dataset",          "split",          "template",  "backend",
      "fine_tune_grid", "retry",   "max_tokens",       "train_perturbations", "test_noise", "mode",
      "two_stage",   "in_context", "baseline",         "calibration",    "positive_label", "repeats",
      "concurrency", "output_dir"};
  return keys;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end()) {
      config_error(fmt::format("unknown key '{}' in config", key));
    }
  }
  ExperimentConfig c;
  c.name = get<std::string>(j, "name", "", "config");
  c.seed = get<std::uint64_t>(j, "seed", 0, "config");

  if (!j.contains("dataset")) config_error("config.dataset is required");
  const auto& d = j["dataset"];
  check_keys(d, {"csv", "synth"}, "dataset");
  if (d.contains("csv")) c.dataset.csv = csv_from_json(d["csv"]);
  if (d.contains("synth")) c.dataset.synth = synth_from_json(d["synth"]);
  if (c.name.empty() && (c.dataset.csv || c.dataset.synth)) c.name = c.dataset.label();

  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, {"train", "validation", "test", "seed", "stratified"}, "split");
    c.split.train = get<double>(s, "train", c.split.train, "split");
    c.split.validation = get<double>(s, "validation", c.split.validation, "split");
    c.split.test = get<double>(s, "test", c.split.test, "split");
    c.split.seed = get<std::uint64_t>(s, "seed", c.split.seed, "split");
    c.split.stratified = get<bool>(s, "stratified", c.split.stratified, "split");
  }
  if (j.contains("template")) c.prompt_template = template_from_json(j["template"]);
  if (j.contains("backend")) c.backend = backend_from_json(j["backend"]);
  if (j.contains("fine_tune_grid")) {
    const auto& g = j["fine_tune_grid"];
    if (!g.is_array()) config_error("fine_tune_grid must be an array");
    c.fine_tune_grid.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
      c.fine_tune_grid.push_back(fine_tune_from_json(g[i], fmt::format("fine_tune_grid[{}]", i)));
    }
  }
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    check_keys(r, {"max_attempts", "initial_temperature", "escalation_temperature"}, "retry");
    c.retry.max_attempts = get<std::size_t>(r, "max_attempts", c.retry.max_attempts, "retry");
    c.retry.initial_temperature = get<double>(r, "initial_temperature", c.retry.initial_temperature, "retry");
    c.retry.escalation_temperature = get<double>(r, "escalation_temperature", c.retry.escalation_temperature, "retry");
  }
  c.max_tokens = get<std::size_t>(j, "max_tokens", c.max_tokens, "config");
  if (j.contains("train_perturbations")) {
    const auto& ps = j["train_perturbations"];
    if (!ps.is_array()) config_error("train_perturbations must be an array");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      c.train_perturbations.push_back(perturb_from_json(ps[i], fmt::format("train_perturbations[{}]", i)));
    }
  }
  if (j.contains("test_noise")) {
    const auto& ns = j["test_noise"];
    if (!ns.is_array()) config_error("test_noise must be an array");
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const auto where = fmt::format("test_noise[{}]", i);
      check_keys(ns[i], {"kind", "epsilon", "seed"}, where);
      perturb::NoiseSpec n;
      n.kind = wrap(where, [&] { return perturb::parse_noise_kind(get<std::string>(ns[i], "kind", "gaussian_linf", where)); });
      n.epsilon = get<double>(ns[i], "epsilon", 0.0, where);
      n.seed = get<std::uint64_t>(ns[i], "seed", 0, where);
      wrap(where, [&] { n.validate(); return 0; });
      c.test_noise.push_back(n);
    }
  }
  c.mode = parse_mode(get<std::string>(j, "mode", "fine_tune", "config"));
  if (j.contains("two_stage")) {
    const auto& t = j["two_stage"];
    check_keys(t, {"pretext_epochs", "per_cluster", "regression_n"}, "two_stage");
    c.two_stage.pretext_epochs = get<std::size_t>(t, "pretext_epochs", c.two_stage.pretext_epochs, "two_stage");
    c.two_stage.per_cluster = get<std::size_t>(t, "per_cluster", c.two_stage.per_cluster, "two_stage");
    c.two_stage.regression_n = get<std::size_t>(t, "regression_n", c.two_stage.regression_n, "two_stage");
  }
  if (j.contains("in_context")) {
    const auto& t = j["in_context"];
    check_keys(t, {"max_chars", "base_model", "separator"}, "in_context");
    c.in_context.max_chars = get<std::size_t>(t, "max_chars", c.in_context.max_chars, "in_context");
    c.in_context.base_model = get<std::string>(t, "base_model", c.in_context.base_model, "in_context");
    c.in_context.separator = get<std::string>(t, "separator", c.in_context.separator, "in_context");
  }
  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    check_keys(b, {"kind", "grid"}, "baseline");
    c.baseline.kind = wrap("baseline.kind",
                           [&] { return baselines::parse_baseline_kind(get<std::string>(b, "kind", "mcc", "baseline")); });
    if (b.contains("grid")) {
      if (!b["grid"].is_array()) config_error("baseline.grid must be an array");
      c.baseline.grid.clear();
      for (std::size_t i = 0; i < b["grid"].size(); ++i) {
        c.baseline.grid.push_back(hyper_from_json(b["grid"][i], fmt::format("baseline.grid[{}]", i)));
      }
    }
  }
  if (j.contains("calibration") && !j["calibration"].is_null()) {
    const auto& k = j["calibration"];
    check_keys(k, {"repeats", "bins", "temperature"}, "calibration");
    CalibrationConfig cal;
    cal.repeats = get<std::size_t>(k, "repeats", cal.repeats, "calibration");
    cal.bins = get<std::size_t>(k, "bins", cal.bins, "calibration");
    cal.temperature = get<double>(k, "temperature", cal.temperature, "calibration");
    c.calibration = cal;
  }
  c.positive_label = get_opt<std::string>(j, "positive_label", "config");
  c.repeats = get<std::size_t>(j, "repeats", c.repeats, "config");
  c.concurrency = get<std::size_t>(j, "concurrency", c.concurrency, "config");
  if (auto out = get_opt<std::string>(j, "output_dir", "config")) c.output_dir = *out;
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  json d;
  if (c.dataset.csv) {
    const auto& s = *c.dataset.csv;
    json cj{{"path", s.path.string()}, {"task", std::string(to_string(s.options.task))}};
    if (const auto* name = std::get_if<std::string>(&s.options.target_column)) cj["target"] = *name;
    else cj["target"] = std::get<std::size_t>(s.options.target_column);
    cj["header"] = s.options.has_header;
    if (s.image) {
      cj["image"] = true;
      cj["crop"] = s.image_crop;
      cj["unit_scale"] = s.image_unit_scale;
    }
    d["csv"] = cj;
  }
  if (c.dataset.synth) d["synth"] = synth_to_json(*c.dataset.synth);
  j["dataset"] = d;
  j["split"] = json{{"train", c.split.train},
                    {"validation", c.split.validation},
                    {"test", c.split.test},
                    {"seed", c.split.seed},
                    {"stratified", c.split.stratified}};
  j["template"] = template_to_json(c.prompt_template);
  j["backend"] = backend_to_json(c.backend);
  j["fine_tune_grid"] = json::array();
  for (const auto& s : c.fine_tune_grid) j["fine_tune_grid"].push_back(fine_tune_to_json(s));
  j["retry"] = json{{"max_attempts", c.retry.max_attempts},
                    {"initial_temperature", c.retry.initial_temperature},
                    {"escalation_temperature", c.retry.escalation_temperature}};
  j["max_tokens"] = c.max_tokens;
  j["train_perturbations"] = json::array();
  for (const auto& op : c.train_perturbations) j["train_perturbations"].push_back(perturb_to_json(op));
  j["test_noise"] = json::array();
  for (const auto& n : c.test_noise) {
    j["test_noise"].push_back(json{{"kind", std::string(perturb::to_string(n.kind))}, {"epsilon", n.epsilon}, {"seed", n.seed}});
  }
  j["mode"] = std::string(to_string(c.mode));
  j["two_stage"] = json{{"pretext_epochs", c.two_stage.pretext_epochs},
                        {"per_cluster", c.two_stage.per_cluster},
                        {"regression_n", c.two_stage.regression_n}};
  j["in_context"] = json{{"max_chars", c.in_context.max_chars},
                         {"base_model", c.in_context.base_model},
                         {"separator", c.in_context.separator}};
  json grid = json::array();
  for (const auto& h : c.baseline.grid) grid.push_back(hyper_to_json(h));
  j["baseline"] = json{{"kind", std::string(baselines::to_string(c.baseline.kind))}, {"grid", grid}};
  if (c.calibration) {
    j["calibration"] = json{{"repeats", c.calibration->repeats},
                            {"bins", c.calibration->bins},
                            {"temperature", c.calibration->temperature}};
  }
  if (c.positive_label) j["positive_label"] = *c.positive_label;
  j["repeats"] = c.repeats;
  j["concurrency"] = c.concurrency;
  if (c.output_dir) j["output_dir"] = c.output_dir->string();
  return j;
}

json interpolate_env(const json& j) {
  static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), var);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      out += s.substr(last, static_cast<std::size_t>(m.position()) - last);
      const char* value = std::getenv(m[1].str().c_str());
      if (!value) config_error(fmt::format("environment variable {} is not set", m[1].str()));
      out += value;
      last = static_cast<std::size_t>(m.position() + m.length());
    }
    out += s.substr(last);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_env(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_env(v);
    return out;
  }
  return j;
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    config_error(fmt::format("override '{}' is not key=value", assignment));
  }
  const std::string path(trim(assignment.substr(0, eq)));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) config_error(fmt::format("bad override path '{}'", path));
    const bool last = dot == std::string::npos;
    if (node->is_array()) {
      const auto idx = parse_double(key);
      if (!idx || *idx < 0 || *idx != std::floor(*idx) || static_cast<std::size_t>(*idx) >= node->size()) {
        config_error(fmt::format("override index '{}' out of range", key));
      }
      node = &(*node)[static_cast<std::size_t>(*idx)];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) config_error(fmt::format("override path '{}' crosses a scalar", path));
      node = &(*node)[key];
    }
    if (last) {
      *node = value;
      return;
    }
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open config {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error(fmt::format("{}: {}", path.string(), e.what()));
  }
  for (const auto& o : overrides) apply_override(j, o);
  j = interpolate_env(j);
  // Relative dataset paths resolve against the config file's directory.
  auto config = config_from_json(j);
  if (config.dataset.csv && config.dataset.csv->path.is_relative() && !std::filesystem::exists(config.dataset.csv->path)) {
    const auto alt = path.parent_path() / config.dataset.csv->path;
    if (std::filesystem::exists(alt)) config.dataset.csv->path = alt;
  }
  return config;
}

std::unique_ptr<backends::Backend> make_backend(const BackendConfig& config, std::uint64_t repeat_seed) {
  switch (config.kind) {
    case backends::BackendKind::memorizer:
      return std::make_unique<backends::MemorizerBackend>(
          backends::MemorizerBackend::Options{mix_seed(config.seed, repeat_seed), config.store_dir});
    case backends::BackendKind::scripted:
      return std::make_unique<backends::ScriptedBackend>(config.responses, config.cycle);
    case backends::BackendKind::http: return std::make_unique<backends::HttpBackend>(config.http);
  }
  throw Error(ErrorCode::config_error, "unknown backend kind");
}

}  // namespace lift::runner
