#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lift {

enum class ErrorCode {
  invalid_argument,
  io_error,
  // core-data
  malformed_row,
  non_numeric_feature,
  non_numeric_target,
  missing_target,
  too_few_samples,
  // synth
  unsupported_dim,
  // prompts
  missing_names,
  template_hole_mismatch,
  separator_in_text,
  query_too_long,
  out_of_range,
  malformed_code,
  bad_pixel_range,
  bad_pixel_count,
  bad_shape,
  malformed_jsonl,
  // backends
  backend_error,
  transport_error,
  job_failed,
  auth_missing,
  unknown_handle,
  continuation_unsupported,
  // perturb / baselines / eval
  wrong_task,
  degenerate_targets,
  empty_training_set,
  dimension_mismatch,
  constant_truth,
  unknown_label,
  length_mismatch,
  // runner
  config_error,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. The code identifies the failure
/// class; line/column are set for file-parsing failures (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt,
        std::optional<std::size_t> column = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  std::optional<std::size_t> column() const noexcept { return column_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
  std::optional<std::size_t> column_;
};

}  // namespace lift
