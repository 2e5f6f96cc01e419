#pragma once

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lift/backends.hpp"

namespace lift::backends {

/// Request/response bodies of the OpenAI-compatible REST surface. Pure
/// functions so they can be pinned by golden files without a network.
namespace wire {

nlohmann::json completion_request_body(const std::string& model, const CompletionRequest& request);
std::string completion_text(const nlohmann::json& response);

nlohmann::json fine_tune_job_body(const std::string& training_file_id, const FineTuneSpec& spec,
                                  const std::optional<std::string>& from_model);

struct JobStatus {
  std::string id;
  std::string status;
  std::optional<std::string> fine_tuned_model;
  std::optional<std::string> error_message;

  bool terminal() const;
  bool succeeded() const;
};

JobStatus parse_job_status(const nlohmann::json& response);
std::string parse_file_id(const nlohmann::json& response);

}  // namespace wire

/// Token bucket: `requests_per_minute` steady rate with a burst of `burst`.
/// A non-positive rate disables limiting.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimiter(double requests_per_minute, double burst = 1.0);

  void acquire();
  /// Non-blocking; returns the wait needed before a token is available.
  Clock::duration reserve();

 private:
  std::mutex mutex_;
  double rate_per_second_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

struct HttpOptions {
  std::string base_url = "https://api.openai.com";
  std::string api_prefix = "/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  double requests_per_minute = 60.0;
  double burst = 1.0;
  std::size_t max_retries = 5;
  double backoff_initial_s = 1.0;
  double backoff_max_s = 60.0;
  double poll_interval_s = 5.0;
  double poll_timeout_s = 4.0 * 3600.0;
  double connect_timeout_s = 30.0;
  double read_timeout_s = 300.0;
  bool supports_continuation = false;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);
  ~HttpBackend() override;

  BackendKind kind() const override { return BackendKind::http; }
  ModelHandle fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) override;
  ModelHandle continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                 const FineTuneSpec& spec) override;
  std::string complete(const ModelHandle& handle, const CompletionRequest& request) override;

  const HttpOptions& options() const { return options_; }

 private:
  struct Response {
    int status = 0;
    std::string body;
  };

  std::string api_key() const;
  ModelHandle run_job(std::span<const PromptedExample> training, const FineTuneSpec& spec,
                      const std::optional<std::string>& from_model);
  nlohmann::json request_json(const std::string& method, const std::string& path, const std::string& body,
                              const std::string& content_type);
  nlohmann::json upload_training_file(const std::string& jsonl);
  Response send_with_retry(const std::function<Response()>& send);

  HttpOptions options_;
  RateLimiter limiter_;
};

}  // namespace lift::backends
