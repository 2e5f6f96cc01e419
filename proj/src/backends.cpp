#include "lift/backends.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/text.hpp"

namespace lift::backends {

void FineTuneSpec::validate() const {
  if (epochs < 1) throw Error(ErrorCode::invalid_argument, "fine-tune epochs must be >= 1");
  if (learning_rate_multiplier && !(*learning_rate_multiplier > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "learning_rate_multiplier must be > 0");
  }
}

void CompletionRequest::validate() const {
  if (max_tokens < 1) throw Error(ErrorCode::invalid_argument, "max_tokens must be >= 1");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::invalid_argument, fmt::format("temperature {} outside [0,2]", temperature));
  }
  for (const auto& s : stop) {
    if (s.empty()) throw Error(ErrorCode::invalid_argument, "stop strings must be non-empty");
  }
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::http: return "http";
    case BackendKind::memorizer: return "memorizer";
    case BackendKind::scripted: return "scripted";
  }
  return "?";
}

std::string truncate_at_stop(std::string text, std::span<const std::string> stops) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

ModelHandle Backend::continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample>,
                                        const FineTuneSpec&) {
  throw Error(ErrorCode::continuation_unsupported,
              fmt::format("{} backend cannot continue fine-tuning from '{}'", to_string(kind()), from.model_id));
}

ModelHandle Backend::base_model(const std::string& name) { return {kind(), name}; }

std::vector<JobRecord> Backend::jobs() const {
  std::lock_guard lock(jobs_mutex_);
  return jobs_;
}

void Backend::check_kind(const ModelHandle& handle) const {
  if (handle.backend_kind != kind()) {
    throw Error(ErrorCode::unknown_handle, fmt::format("handle '{}' was issued by a {} backend, not {}",
                                                       handle.model_id, to_string(handle.backend_kind),
                                                       to_string(kind())));
  }
}

void Backend::record_job(JobRecord record) {
  std::lock_guard lock(jobs_mutex_);
  jobs_.push_back(std::move(record));
}

ModelHandle fine_tune_jsonl(Backend& backend, std::istream& jsonl, const FineTuneSpec& spec) {
  const auto examples = prompts::read_jsonl(jsonl);
  return backend.fine_tune(examples, spec);
}

ModelHandle two_stage_fine_tune(Backend& backend, std::span<const PromptedExample> pretext,
                                std::span<const PromptedExample> target, const FineTuneSpec& pretext_spec,
                                const FineTuneSpec& target_spec) {
  if (pretext.empty() || target.empty()) {
    throw Error(ErrorCode::invalid_argument, "two-stage fine-tuning needs non-empty pretext and target data");
  }
  const ModelHandle warm = backend.fine_tune(pretext, pretext_spec);
  return backend.continue_fine_tune(warm, target, target_spec);
}

// ---------------------------------------------------------------------------
// Memorizer

namespace {

std::vector<std::string> sorted_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto t : split_whitespace(text)) out.emplace_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t sorted_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    const int cmp = a[i].compare(b[j]);
    if (cmp == 0) {
      ++n;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void require_training(std::span<const PromptedExample> training) {
  if (training.empty()) throw Error(ErrorCode::invalid_argument, "fine-tuning needs at least one example");
  for (const auto& ex : training) {
    if (ex.completion.empty()) throw Error(ErrorCode::invalid_argument, "fine-tuning example with empty completion");
  }
}

}  // namespace

std::size_t token_overlap(std::string_view a, std::string_view b) {
  return sorted_overlap(sorted_tokens(a), sorted_tokens(b));
}

struct MemorizerBackend::Model {
  std::vector<PromptedExample> entries;
  std::vector<std::vector<std::string>> tokens;
  std::unordered_map<std::string, std::size_t> index;
  Rng rng;
  std::mutex rng_mutex;

  // Later pairs win on prompt collision but keep the original slot.
  void add(const PromptedExample& ex) {
    const auto it = index.find(ex.prompt);
    if (it != index.end()) {
      entries[it->second].completion = ex.completion;
      return;
    }
    index.emplace(ex.prompt, entries.size());
    entries.push_back(ex);
    tokens.push_back(sorted_tokens(ex.prompt));
  }
};

MemorizerBackend::MemorizerBackend() : MemorizerBackend(Options{}) {}
MemorizerBackend::MemorizerBackend(Options options) : options_(std::move(options)) {}
MemorizerBackend::~MemorizerBackend() = default;

ModelHandle MemorizerBackend::install(std::shared_ptr<Model> model, const std::optional<ModelHandle>& parent,
                                      const FineTuneSpec& spec, std::size_t n_examples) {
  std::uint64_t h = fnv1a(parent ? parent->model_id : spec.base_model);
  h = fnv1a(fmt::format("|{}|", spec.epochs), h);
  for (const auto& ex : model->entries) {
    h = fnv1a(ex.prompt, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(ex.completion, h);
    h = fnv1a("\x1e", h);
  }
  const std::string id = fmt::format("mem-{:016x}", h);
  model->rng = make_rng(options_.seed, h);

  if (options_.store_dir) {
    std::filesystem::create_directories(*options_.store_dir);
    prompts::save_jsonl(*options_.store_dir / (id + ".jsonl"), model->entries);
  }
  {
    std::lock_guard lock(mutex_);
    models_[id] = std::move(model);
  }
  JobRecord job;
  job.job_id = "job-" + id;
  job.model_id = id;
  if (parent) job.parent_model = parent->model_id;
  job.base_model = spec.base_model;
  job.epochs = spec.epochs;
  job.learning_rate_multiplier = spec.learning_rate_multiplier;
  job.batch_size = spec.batch_size;
  job.n_examples = n_examples;
  job.status = "succeeded";
  record_job(std::move(job));
  return {BackendKind::memorizer, id};
}

ModelHandle MemorizerBackend::fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) {
  spec.validate();
  require_training(training);
  auto model = std::make_shared<Model>();
  for (const auto& ex : training) model->add(ex);
  return install(std::move(model), std::nullopt, spec, training.size());
}

ModelHandle MemorizerBackend::continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                                 const FineTuneSpec& spec) {
  spec.validate();
  require_training(training);
  const auto parent = find(from);
  auto model = std::make_shared<Model>();
  for (const auto& ex : parent->entries) model->add(ex);
  for (const auto& ex : training) model->add(ex);
  return install(std::move(model), from, spec, training.size());
}

ModelHandle MemorizerBackend::base_model(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (!models_.count(name)) {
    auto model = std::make_shared<Model>();
    model->rng = make_rng(options_.seed, fnv1a(name));
    models_[name] = std::move(model);
  }
  return {BackendKind::memorizer, name};
}

std::shared_ptr<MemorizerBackend::Model> MemorizerBackend::find(const ModelHandle& handle) {
  check_kind(handle);
  {
    std::lock_guard lock(mutex_);
    const auto it = models_.find(handle.model_id);
    if (it != models_.end()) return it->second;
  }
  if (options_.store_dir) {
    const auto path = *options_.store_dir / (handle.model_id + ".jsonl");
    if (std::filesystem::exists(path)) {
      auto model = std::make_shared<Model>();
      for (const auto& ex : prompts::load_jsonl(path)) model->add(ex);
      model->rng = make_rng(options_.seed, fnv1a(handle.model_id));
      std::lock_guard lock(mutex_);
      return models_.emplace(handle.model_id, std::move(model)).first->second;
    }
  }
  throw Error(ErrorCode::unknown_handle, fmt::format("unknown memorizer model '{}'", handle.model_id));
}

std::vector<PromptedExample> MemorizerBackend::table(const ModelHandle& handle) { return find(handle)->entries; }

std::string MemorizerBackend::complete(const ModelHandle& handle, const CompletionRequest& request) {
  request.validate();
  const auto model = find(handle);
  if (const auto it = model->index.find(request.prompt); it != model->index.end()) {
    return truncate_at_stop(model->entries[it->second].completion, request.stop);
  }
  if (model->entries.empty()) return "";

  const auto query = sorted_tokens(request.prompt);
  std::vector<std::pair<std::size_t, std::size_t>> scored;  // (overlap, index)
  scored.reserve(model->entries.size());
  for (std::size_t i = 0; i < model->entries.size(); ++i) {
    scored.emplace_back(sorted_overlap(query, model->tokens[i]), i);
  }
  const auto better = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };

  std::size_t chosen = 0;
  if (request.temperature == 0.0) {
    chosen = std::min_element(scored.begin(), scored.end(), better)->second;
  } else {
    const std::size_t top = std::min<std::size_t>(3, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top), scored.end(), better);
    std::uniform_int_distribution<std::size_t> pick(0, top - 1);
    std::lock_guard lock(model->rng_mutex);
    chosen = scored[pick(model->rng)].second;
  }
  return truncate_at_stop(model->entries[chosen].completion, request.stop);
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, bool cycle)
    : responses_(std::move(responses)), cycle_(cycle) {}

ScriptedBackend::ScriptedBackend(Generator generator) : generator_(std::move(generator)) {}

ModelHandle ScriptedBackend::fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) {
  spec.validate();
  require_training(training);
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = fmt::format("scripted-{}", models_++);
  }
  JobRecord job{"job-" + id, id, std::nullopt, spec.base_model, spec.epochs, spec.learning_rate_multiplier,
                spec.batch_size, training.size(), "succeeded"};
  record_job(std::move(job));
  return {BackendKind::scripted, id};
}

ModelHandle ScriptedBackend::continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                                const FineTuneSpec& spec) {
  check_kind(from);
  spec.validate();
  require_training(training);
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = fmt::format("scripted-{}", models_++);
  }
  JobRecord job{"job-" + id, id, from.model_id, spec.base_model, spec.epochs, spec.learning_rate_multiplier,
                spec.batch_size, training.size(), "succeeded"};
  record_job(std::move(job));
  return {BackendKind::scripted, id};
}

std::string ScriptedBackend::complete(const ModelHandle& handle, const CompletionRequest& request) {
  check_kind(handle);
  request.validate();
  Generator generator;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    generator = generator_;
    if (!generator) {
      if (next_ >= responses_.size()) {
        if (!cycle_ || responses_.empty()) throw Error(ErrorCode::backend_error, "scripted backend exhausted");
        next_ = 0;
      }
      return responses_[next_++];
    }
  }
  return generator(request);
}

void ScriptedBackend::push(std::string response) {
  std::lock_guard lock(mutex_);
  responses_.push_back(std::move(response));
}

std::vector<CompletionRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace lift::backends
