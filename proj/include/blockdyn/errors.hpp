#pragma once

#include <stdexcept>
#include <string>

namespace blockdyn {

// Error codes for conditions callers are expected to branch on. Anything not
// listed here is reported as invalid_argument with a message.
enum class errc {
  invalid_argument,
  length_mismatch,
  dimension_mismatch,
  shape_mismatch,
  zero_variance_column,
  window_too_long,
  degenerate_ties,
  empty_sequence,
  empty_grid,
  empty_graph,
  empty_layer,
  layer_mismatch,
  k_too_large,
  non_consensus,
  empty_block,
  theta_on_boundary,
  non_triangular_dimension,
  too_few_observations,
  em_convergence_failure,
  degenerate_state,
  single_cluster,
  schedule_mismatch,
  io_error,
  config_error,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

}  // namespace blockdyn
