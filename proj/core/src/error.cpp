#include "miabench/error.hpp"

namespace miabench {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::duplicate_id: return "DuplicateId";
    case ErrorCode::decode_error: return "DecodeError";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::pool_too_small: return "PoolTooSmall";
    case ErrorCode::empty_reference: return "EmptyReference";
    case ErrorCode::empty_sample: return "EmptySample";
    case ErrorCode::empty_scores: return "EmptyScores";
    case ErrorCode::empty_text: return "EmptyText";
    case ErrorCode::empty_trace: return "EmptyTrace";
    case ErrorCode::empty_corpus: return "EmptyCorpus";
    case ErrorCode::too_short: return "TooShort";
    case ErrorCode::too_few_items: return "TooFewItems";
    case ErrorCode::bad_k: return "BadK";
    case ErrorCode::single_class_training: return "SingleClassTraining";
    case ErrorCode::untrainable_ensemble: return "UntrainableEnsemble";
    case ErrorCode::all_candidates_too_short: return "AllCandidatesTooShort";
    case ErrorCode::missing_trace: return "MissingTrace";
    case ErrorCode::invalid_trace: return "InvalidTrace";
    case ErrorCode::unknown_id: return "UnknownId";
    case ErrorCode::internal: return "InternalError";
  }
  return "InternalError";
}

ExitStatus exit_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::config_error: return ExitStatus::config;
    case ErrorCode::internal: return ExitStatus::internal;
    default: return ExitStatus::data;
  }
}

}  // namespace miabench
