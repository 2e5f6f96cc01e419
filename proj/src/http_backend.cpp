#include "lift/http_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "httplib.h"

#include "lift/error.hpp"

namespace lift::backends {

namespace wire {

nlohmann::json completion_request_body(const std::string& model, const CompletionRequest& request) {
  nlohmann::json body{
      {"model", model},
      {"prompt", request.prompt},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  if (!request.stop.empty()) body["stop"] = request.stop;
  return body;
}

std::string completion_text(const nlohmann::json& response) {
  const auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty() ||
      !(*choices)[0].contains("text") || !(*choices)[0]["text"].is_string()) {
    throw Error(ErrorCode::backend_error, "completion response has no choices[0].text");
  }
  return (*choices)[0]["text"].get<std::string>();
}

nlohmann::json fine_tune_job_body(const std::string& training_file_id, const FineTuneSpec& spec,
                                  const std::optional<std::string>& from_model) {
  nlohmann::json hyper{{"n_epochs", spec.epochs}};
  if (spec.learning_rate_multiplier) hyper["learning_rate_multiplier"] = *spec.learning_rate_multiplier;
  if (spec.batch_size) hyper["batch_size"] = *spec.batch_size;
  return nlohmann::json{
      {"training_file", training_file_id},
      {"model", from_model.value_or(spec.base_model)},
      {"hyperparameters", hyper},
  };
}

bool JobStatus::terminal() const { return status == "succeeded" || status == "failed" || status == "cancelled"; }

bool JobStatus::succeeded() const { return status == "succeeded"; }

JobStatus parse_job_status(const nlohmann::json& response) {
  if (!response.contains("id") || !response.contains("status")) {
    throw Error(ErrorCode::backend_error, "job response lacks id/status");
  }
  JobStatus out;
  out.id = response["id"].get<std::string>();
  out.status = response["status"].get<std::string>();
  if (response.contains("fine_tuned_model") && response["fine_tuned_model"].is_string()) {
    out.fine_tuned_model = response["fine_tuned_model"].get<std::string>();
  }
  if (response.contains("error") && response["error"].is_object() && response["error"].contains("message") &&
      response["error"]["message"].is_string()) {
    out.error_message = response["error"]["message"].get<std::string>();
  }
  return out;
}

std::string parse_file_id(const nlohmann::json& response) {
  if (!response.contains("id") || !response["id"].is_string()) {
    throw Error(ErrorCode::backend_error, "file upload response lacks id");
  }
  return response["id"].get<std::string>();
}

}  // namespace wire

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(double requests_per_minute, double burst)
    : rate_per_second_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(Clock::now()) {}

RateLimiter::Clock::duration RateLimiter::reserve() {
  if (rate_per_second_ <= 0.0) return Clock::duration::zero();
  std::lock_guard lock(mutex_);
  const auto now = Clock::now();
  const double elapsed = std::chrono::duration<double>(now - last_).count();
  last_ = now;
  tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_second_);
  tokens_ -= 1.0;
  if (tokens_ >= 0.0) return Clock::duration::zero();
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(-tokens_ / rate_per_second_));
}

void RateLimiter::acquire() {
  const auto wait = reserve();
  if (wait > Clock::duration::zero()) std::this_thread::sleep_for(wait);
}

// ---------------------------------------------------------------------------

namespace {

std::chrono::milliseconds seconds_to_ms(double s) {
  return std::chrono::milliseconds(static_cast<long long>(std::llround(s * 1000.0)));
}

std::unique_ptr<httplib::Client> make_client(const HttpOptions& options) {
  auto client = std::make_unique<httplib::Client>(options.base_url);
  client->set_connection_timeout(seconds_to_ms(options.connect_timeout_s));
  client->set_read_timeout(seconds_to_ms(options.read_timeout_s));
  client->set_write_timeout(seconds_to_ms(options.read_timeout_s));
  return client;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpOptions options)
    : options_(std::move(options)), limiter_(options_.requests_per_minute, options_.burst) {}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::api_key() const {
  const char* value = std::getenv(options_.api_key_env.c_str());
  if (!value || !*value) {
    throw Error(ErrorCode::auth_missing, fmt::format("environment variable {} is not set", options_.api_key_env));
  }
  return value;
}

HttpBackend::Response HttpBackend::send_with_retry(const std::function<Response()>& send) {
  double delay = options_.backoff_initial_s;
  for (std::size_t attempt = 0;; ++attempt) {
    limiter_.acquire();
    Response r = send();
    if (!retryable(r.status)) return r;
    if (attempt >= options_.max_retries) {
      throw Error(ErrorCode::transport_error,
                  r.status == 0 ? std::string("connection failed after retries")
                                : fmt::format("HTTP {} after {} retries", r.status, attempt));
    }
    std::this_thread::sleep_for(seconds_to_ms(delay));
    delay = std::min(options_.backoff_max_s, delay * 2.0);
  }
}

nlohmann::json HttpBackend::request_json(const std::string& method, const std::string& path, const std::string& body,
                                         const std::string& content_type) {
  const std::string key = api_key();
  const httplib::Headers headers{{"Authorization", "Bearer " + key}};
  const std::string full_path = options_.api_prefix + path;
  const Response r = send_with_retry([&] {
    auto client = make_client(options_);
    httplib::Result res = method == "GET" ? client->Get(full_path, headers)
                                          : client->Post(full_path, headers, body, content_type);
    if (!res) return Response{0, {}};
    return Response{res->status, res->body};
  });
  if (r.status < 200 || r.status >= 300) {
    throw Error(ErrorCode::backend_error,
                fmt::format("{} {} returned HTTP {}: {}", method, full_path, r.status, r.body.substr(0, 500)));
  }
  try {
    return nlohmann::json::parse(r.body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::backend_error, fmt::format("{} {} returned non-JSON body", method, full_path));
  }
}

nlohmann::json HttpBackend::upload_training_file(const std::string& jsonl) {
  const std::string key = api_key();
  const httplib::Headers headers{{"Authorization", "Bearer " + key}};
  const std::string full_path = options_.api_prefix + "/files";
  const httplib::MultipartFormDataItems items{
      {"purpose", "fine-tune", "", ""},
      {"file", jsonl, "training.jsonl", "application/jsonl"},
  };
  const Response r = send_with_retry([&] {
    auto client = make_client(options_);
    httplib::Result res = client->Post(full_path, headers, items);
    if (!res) return Response{0, {}};
    return Response{res->status, res->body};
  });
  if (r.status < 200 || r.status >= 300) {
    throw Error(ErrorCode::backend_error, fmt::format("file upload returned HTTP {}: {}", r.status, r.body.substr(0, 500)));
  }
  return nlohmann::json::parse(r.body);
}

ModelHandle HttpBackend::run_job(std::span<const PromptedExample> training, const FineTuneSpec& spec,
                                 const std::optional<std::string>& from_model) {
  spec.validate();
  api_key();  // fail before any network traffic
  if (training.empty()) throw Error(ErrorCode::invalid_argument, "fine-tuning needs at least one example");

  std::ostringstream jsonl;
  prompts::write_jsonl(jsonl, training);
  const std::string file_id = wire::parse_file_id(upload_training_file(jsonl.str()));

  const auto body = wire::fine_tune_job_body(file_id, spec, from_model);
  auto status = wire::parse_job_status(request_json("POST", "/fine_tuning/jobs", body.dump(), "application/json"));

  const auto deadline = std::chrono::steady_clock::now() + seconds_to_ms(options_.poll_timeout_s);
  while (!status.terminal()) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw Error(ErrorCode::job_failed, fmt::format("job {} did not finish before the poll timeout", status.id));
    }
    std::this_thread::sleep_for(seconds_to_ms(options_.poll_interval_s));
    status = wire::parse_job_status(request_json("GET", "/fine_tuning/jobs/" + status.id, "", ""));
  }

  JobRecord job;
  job.job_id = status.id;
  job.parent_model = from_model;
  job.base_model = spec.base_model;
  job.epochs = spec.epochs;
  job.learning_rate_multiplier = spec.learning_rate_multiplier;
  job.batch_size = spec.batch_size;
  job.n_examples = training.size();
  job.status = status.status;
  if (!status.succeeded() || !status.fine_tuned_model) {
    record_job(job);
    throw Error(ErrorCode::job_failed, status.error_message.value_or("job ended with status " + status.status));
  }
  job.model_id = *status.fine_tuned_model;
  record_job(job);
  return {BackendKind::http, *status.fine_tuned_model};
}

ModelHandle HttpBackend::fine_tune(std::span<const PromptedExample> training, const FineTuneSpec& spec) {
  return run_job(training, spec, std::nullopt);
}

ModelHandle HttpBackend::continue_fine_tune(const ModelHandle& from, std::span<const PromptedExample> training,
                                            const FineTuneSpec& spec) {
  check_kind(from);
  if (!options_.supports_continuation) {
    throw Error(ErrorCode::continuation_unsupported,
                fmt::format("provider at {} is not configured to resume from '{}'", options_.base_url, from.model_id));
  }
  return run_job(training, spec, from.model_id);
}

std::string HttpBackend::complete(const ModelHandle& handle, const CompletionRequest& request) {
  check_kind(handle);
  request.validate();
  const auto body = wire::completion_request_body(handle.model_id, request);
  const auto response = request_json("POST", "/completions", body.dump(), "application/json");
  return truncate_at_stop(wire::completion_text(response), request.stop);
}

}  // namespace lift::backends
