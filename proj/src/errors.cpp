#include "blockdyn/errors.hpp"

namespace blockdyn {

const char* errc_name(errc code) {
  switch (code) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::zero_variance_column: return "ZeroVarianceColumn";
    case errc::window_too_long: return "WindowTooLong";
    case errc::degenerate_ties: return "DegenerateTies";
    case errc::empty_sequence: return "EmptySequence";
    case errc::empty_grid: return "EmptyGrid";
    case errc::empty_graph: return "EmptyGraph";
    case errc::empty_layer: return "EmptyLayer";
    case errc::layer_mismatch: return "LayerMismatch";
    case errc::k_too_large: return "KTooLarge";
    case errc::non_consensus: return "NonConsensus";
    case errc::empty_block: return "EmptyBlock";
    case errc::theta_on_boundary: return "ThetaOnBoundary";
    case errc::non_triangular_dimension: return "NonTriangularDimension";
    case errc::too_few_observations: return "TooFewObservations";
    case errc::em_convergence_failure: return "EmConvergenceFailure";
    case errc::degenerate_state: return "DegenerateState";
    case errc::single_cluster: return "SingleCluster";
    case errc::schedule_mismatch: return "ScheduleMismatch";
    case errc::io_error: return "IoError";
    case errc::config_error: return "ConfigError";
  }
  return "Error";
}

}  // namespace blockdyn
