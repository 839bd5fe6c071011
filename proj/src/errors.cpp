#include "opflow/errors.hpp"

namespace opflow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::mass_sum_violation: return "MassSumViolation";
    case ErrorCode::range_violation: return "RangeViolation";
    case ErrorCode::self_loop: return "SelfLoop";
    case ErrorCode::empty_graph: return "EmptyGraph";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::too_large: return "TooLarge";
    case ErrorCode::no_tape: return "NoTape";
    case ErrorCode::index_out_of_range: return "IndexOutOfRange";
    case ErrorCode::divergence: return "Divergence";
    case ErrorCode::window_too_large: return "WindowTooLarge";
    case ErrorCode::insufficient_candidates: return "InsufficientCandidates";
    case ErrorCode::graph_too_small: return "GraphTooSmall";
    case ErrorCode::empty_test_set: return "EmptyTestSet";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::format_error: return "FormatError";
  }
  return "Unknown";
}

}  // namespace opflow
