#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lift/prompts.hpp"
#include "lift/random.hpp"

namespace lift::backends {

using prompts::PromptedExample;

struct FineTuneSpec {
  std::size_t epochs = 5;
  std::optional<double> learning_rate_multiplier;
  std::string base_model = "davinci-002";
  // Passed through to the training service unvalidated.
  std::optional<std::size_t> batch_size;

  void validate() const;
};

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  std::size_t max_tokens = 64;
  std::vector<std::string> stop{"@@@"};

  void validate() const;
};

enum class BackendKind { http, memorizer, scripted };

std::string_view to_string(BackendKind kind);

struct ModelHandle {
  BackendKind backend_kind = BackendKind::memorizer;
  std::string model_id;

  bool operator==(const ModelHandle&) const = default;
};

/// Metadata of one fine-tune job, persisted next to experiment results.
struct JobRecord {
  std::string job_id;
  std::string model_id;
  std::optional<std::string> parent_model;
  std::string base_model;
  std::size_t epochs = 0;
  std::optional<double> learning_rate_multiplier;
  std::optional<std::size_t> batch_size;
  std::size_t n_examples = 0;
  std::string status;
};

/// Text up to (not including) the earliest occurrence of any stop string.
std::string truncate_at_stop(std::string text, std::span<const std::string> stops);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;

  virtual ModelHandle fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) = 0;

  /// Continue training from an existing handle. Backends that cannot resume
  /// throw ContinuationUnsupported.
  virtual ModelHandle continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                         const FineTuneSpec& spec);

  virtual std::string complete(const ModelHandle& handle, const CompletionRequest& request) = 0;

  /// Handle for an un-tuned base model (in-context learning).
  virtual ModelHandle base_model(const std::string& name);

  std::vector<JobRecord> jobs() const;

 protected:
  void check_kind(const ModelHandle& handle) const;
  void record_job(JobRecord record);

 private:
  mutable std::mutex jobs_mutex_;
  std::vector<JobRecord> jobs_;
};

/// Parses and validates a JSONL stream, then fine-tunes on it.
ModelHandle fine_tune_jsonl(Backend& backend, std::istream& jsonl, const FineTuneSpec& spec);

/// Pretext stage with `pretext_spec`, then continuation on the target data.
ModelHandle two_stage_fine_tune(Backend& backend, std::span<const PromptedExample> pretext,
                                std::span<const PromptedExample> target, const FineTuneSpec& pretext_spec,
                                const FineTuneSpec& target_spec);

// ---------------------------------------------------------------------------

/// Offline test double: exact-match lookup table plus a bag-of-tokens
/// nearest-prompt fallback. Not a model.
class MemorizerBackend final : public Backend {
 public:
  struct Options {
    std::uint64_t seed = 0;
    // When set, models are persisted as <store_dir>/<model_id>.jsonl and
    // reloaded on demand, so handles survive across processes.
    std::optional<std::filesystem::path> store_dir;
  };

  MemorizerBackend();
  explicit MemorizerBackend(Options options);
  ~MemorizerBackend() override;

  BackendKind kind() const override { return BackendKind::memorizer; }
  ModelHandle fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) override;
  ModelHandle continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                 const FineTuneSpec& spec) override;
  std::string complete(const ModelHandle& handle, const CompletionRequest& request) override;
  ModelHandle base_model(const std::string& name) override;

  /// Stored pairs of a model in lookup order.
  std::vector<PromptedExample> table(const ModelHandle& handle);

 private:
  struct Model;
  std::shared_ptr<Model> find(const ModelHandle& handle);
  ModelHandle install(std::shared_ptr<Model> model, const std::optional<ModelHandle>& parent,
                      const FineTuneSpec& spec, std::size_t n_examples);

  Options options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Model>> models_;
};

/// Multiset intersection size of whitespace-separated tokens.
std::size_t token_overlap(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------

/// Returns queued responses verbatim (or the output of a generator), so
/// tests can inject raw provider text including stop strings and garbage.
class ScriptedBackend final : public Backend {
 public:
  using Generator = std::function<std::string(const CompletionRequest&)>;

  explicit ScriptedBackend(std::vector<std::string> responses = {}, bool cycle = false);
  explicit ScriptedBackend(Generator generator);

  BackendKind kind() const override { return BackendKind::scripted; }
  ModelHandle fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) override;
  ModelHandle continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                 const FineTuneSpec& spec) override;
  std::string complete(const ModelHandle& handle, const CompletionRequest& request) override;

  void push(std::string response);
  std::vector<CompletionRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  bool cycle_ = false;
  Generator generator_;
  std::vector<CompletionRequest> log_;
  std::size_t models_ = 0;
};

}  // namespace lift::backends
