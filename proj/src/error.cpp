#include "lift/error.hpp"

namespace lift {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::malformed_row: return "MalformedRow";
    case ErrorCode::non_numeric_feature: return "NonNumericFeature";
    case ErrorCode::non_numeric_target: return "NonNumericTarget";
    case ErrorCode::missing_target: return "MissingTarget";
    case ErrorCode::too_few_samples: return "TooFewSamples";
    case ErrorCode::unsupported_dim: return "UnsupportedDim";
    case ErrorCode::missing_names: return "MissingNames";
    case ErrorCode::template_hole_mismatch: return "TemplateHoleMismatch";
    case ErrorCode::separator_in_text: return "SeparatorInText";
    case ErrorCode::query_too_long: return "QueryTooLong";
    case ErrorCode::out_of_range: return "OutOfRange";
    case ErrorCode::malformed_code: return "MalformedCode";
    case ErrorCode::bad_pixel_range: return "BadPixelRange";
    case ErrorCode::bad_pixel_count: return "BadPixelCount";
    case ErrorCode::bad_shape: return "BadShape";
    case ErrorCode::malformed_jsonl: return "MalformedJsonl";
    case ErrorCode::backend_error: return "BackendError";
    case ErrorCode::transport_error: return "TransportError";
    case ErrorCode::job_failed: return "JobFailed";
    case ErrorCode::auth_missing: return "AuthMissing";
    case ErrorCode::unknown_handle: return "UnknownHandle";
    case ErrorCode::continuation_unsupported: return "ContinuationUnsupported";
    case ErrorCode::wrong_task: return "WrongTask";
    case ErrorCode::degenerate_targets: return "DegenerateTargets";
    case ErrorCode::empty_training_set: return "EmptyTrainingSet";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::constant_truth: return "ConstantTruth";
    case ErrorCode::unknown_label: return "UnknownLabel";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::config_error: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line, std::optional<std::size_t> column)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      line_(line),
      column_(column) {}

}  // namespace lift
