#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lift/backends.hpp"
#include "lift/data.hpp"

namespace lift::parse {

enum class InvalidReason { no_end_token, numeric_parse, label_mismatch, empty };

std::string_view to_string(InvalidReason reason);

struct ParseOptions {
  std::string end_token = "@@@";
  std::string answer_prefix = "y=";
  // Require the end token to be present. Backends that honour stop
  // strings strip it, so this is off by default.
  bool require_end_token = false;
  // Map a non-matching label to the closest one by edit distance.
  bool fuzzy_labels = false;
};

struct ParseResult {
  std::optional<Target> value;
  std::optional<InvalidReason> reason;

  bool valid() const { return value.has_value(); }
};

ParseResult parse_completion(std::string_view text, TaskKind task, std::span<const std::string> label_set,
                             const ParseOptions& options = {});

std::size_t levenshtein(std::string_view a, std::string_view b);

struct RetryPolicy {
  std::size_t max_attempts = 5;
  double initial_temperature = 0.0;
  double escalation_temperature = 0.75;

  void validate() const;
  double temperature(std::size_t attempt) const;  // attempt is 0-based
};

struct Prediction {
  Target value;
  bool valid = false;
  std::size_t attempts = 0;
  bool used_fallback = false;
  std::vector<std::string> raw_texts;
  std::vector<double> temperatures;
  std::vector<InvalidReason> reasons;  // one per invalid attempt
};

using CompletionSource = std::function<std::string(const backends::CompletionRequest&)>;

struct InferenceSettings {
  TaskKind task = TaskKind::regression;
  std::vector<std::string> label_set;
  Target fallback = 0.0;
  RetryPolicy retry;
  ParseOptions parse;
  std::size_t max_tokens = 64;
};

/// Attempt 1 at the initial temperature, later attempts at the escalation
/// temperature; the first valid parse wins, otherwise the fallback.
/// Backend errors propagate.
Prediction infer_with_retry(const CompletionSource& source, const std::string& prompt,
                            const InferenceSettings& settings);

/// Completion source bound to a backend and handle.
CompletionSource bind(backends::Backend& backend, backends::ModelHandle handle);

/// Training-set mean (regression) or majority label, ties to label_set order.
Target fallback_for(const TabularDataset& train);

}  // namespace lift::parse
