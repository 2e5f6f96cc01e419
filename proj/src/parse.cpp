#include "lift/parse.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/text.hpp"

namespace lift::parse {

std::string_view to_string(InvalidReason reason) {
  switch (reason) {
    case InvalidReason::no_end_token: return "NoEndToken";
    case InvalidReason::numeric_parse: return "NumericParse";
    case InvalidReason::label_mismatch: return "LabelMismatch";
    case InvalidReason::empty: return "Empty";
  }
  return "?";
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

ParseResult parse_completion(std::string_view text, TaskKind task, std::span<const std::string> label_set,
                             const ParseOptions& options) {
  if (options.end_token.empty()) throw Error(ErrorCode::invalid_argument, "end token must be non-empty");

  const auto cut = text.find(options.end_token);
  if (cut == std::string_view::npos && options.require_end_token) {
    return {std::nullopt, InvalidReason::no_end_token};
  }
  std::string_view body = trim(text.substr(0, cut));
  if (!options.answer_prefix.empty() && body.starts_with(options.answer_prefix)) {
    body = trim(body.substr(options.answer_prefix.size()));
  }
  if (body.empty()) return {std::nullopt, InvalidReason::empty};

  if (task == TaskKind::regression) {
    if (auto v = parse_double(body)) return {Target{*v}, std::nullopt};
    return {std::nullopt, InvalidReason::numeric_parse};
  }

  for (const auto& label : label_set) {
    if (body == label) return {Target{label}, std::nullopt};
  }
  if (options.fuzzy_labels && !label_set.empty()) {
    const std::string* best = &label_set.front();
    std::size_t best_d = levenshtein(body, *best);
    for (const auto& label : label_set) {
      const std::size_t d = levenshtein(body, label);
      if (d < best_d) best = &label, best_d = d;
    }
    return {Target{*best}, std::nullopt};
  }
  return {std::nullopt, InvalidReason::label_mismatch};
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
  for (double t : {initial_temperature, escalation_temperature}) {
    if (!(t >= 0.0 && t <= 2.0)) throw Error(ErrorCode::invalid_argument, "temperatures must lie in [0, 2]");
  }
}

double RetryPolicy::temperature(std::size_t attempt) const {
  return attempt == 0 ? initial_temperature : escalation_temperature;
}

Prediction infer_with_retry(const CompletionSource& source, const std::string& prompt,
                            const InferenceSettings& settings) {
  settings.retry.validate();
  Prediction out;
  for (std::size_t attempt = 0; attempt < settings.retry.max_attempts; ++attempt) {
    backends::CompletionRequest request;
    request.prompt = prompt;
    request.temperature = settings.retry.temperature(attempt);
    request.max_tokens = settings.max_tokens;
    request.stop = {settings.parse.end_token};

    std::string text = source(request);
    out.attempts = attempt + 1;
    out.temperatures.push_back(request.temperature);
    auto parsed = parse_completion(text, settings.task, settings.label_set, settings.parse);
    out.raw_texts.push_back(std::move(text));
    if (parsed.valid()) {
      out.value = std::move(*parsed.value);
      out.valid = true;
      return out;
    }
    out.reasons.push_back(*parsed.reason);
  }
  out.value = settings.fallback;
  out.used_fallback = true;
  return out;
}

CompletionSource bind(backends::Backend& backend, backends::ModelHandle handle) {
  return [&backend, handle = std::move(handle)](const backends::CompletionRequest& request) {
    return backend.complete(handle, request);
  };
}

Target fallback_for(const TabularDataset& train) {
  if (train.empty()) throw Error(ErrorCode::empty_training_set, "fallback needs a non-empty training set");
  if (train.task() == TaskKind::regression) {
    const auto values = train.values();
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& label : train.labels()) ++counts[label];
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& label : train.label_set()) {
    const auto it = counts.find(label);
    const std::size_t c = it == counts.end() ? 0 : it->second;
    if (!best || c > best_count) best = &label, best_count = c;
  }
  return *best;
}

}  // namespace lift::parse
