#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace opflow {

enum class ErrorCode {
  mass_sum_violation,
  range_violation,
  self_loop,
  empty_graph,
  shape_mismatch,
  too_large,
  no_tape,
  index_out_of_range,
  divergence,
  window_too_large,
  insufficient_candidates,
  graph_too_small,
  empty_test_set,
  invalid_argument,
  io_error,
  format_error,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace opflow
