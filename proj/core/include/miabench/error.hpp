#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace miabench {

enum class ErrorCode {
  // configuration
  config_error,
  // data
  duplicate_id,
  decode_error,
  io_error,
  parse_error,
  pool_too_small,
  empty_reference,
  empty_sample,
  empty_scores,
  empty_text,
  empty_trace,
  empty_corpus,
  too_short,
  too_few_items,
  bad_k,
  single_class_training,
  untrainable_ensemble,
  all_candidates_too_short,
  missing_trace,
  invalid_trace,
  unknown_id,
  // everything else
  internal,
};

/// Process exit codes used by the command-line tool.
enum class ExitStatus : int { ok = 0, config = 1, data = 2, internal = 3 };

std::string_view error_code_name(ErrorCode code) noexcept;
ExitStatus exit_status_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace miabench
