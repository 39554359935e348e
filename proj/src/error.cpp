#include "evf/error.hpp"

namespace evf {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::infeasible_spec: return "infeasible-spec";
    case ErrorCode::geometry: return "geometry";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::solver: return "solver";
    case ErrorCode::modeling: return "modeling";
    case ErrorCode::extraction: return "extraction";
    case ErrorCode::curve: return "curve";
    case ErrorCode::range: return "range";
    case ErrorCode::evaluation: return "evaluation";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parse: return 2;
    case ErrorCode::invalid_spec: return 3;
    case ErrorCode::infeasible_spec: return 4;
    case ErrorCode::solver:
    case ErrorCode::modeling: return 5;
    case ErrorCode::io: return 6;
    case ErrorCode::geometry:
    case ErrorCode::resolution: return 7;
    case ErrorCode::extraction:
    case ErrorCode::curve:
    case ErrorCode::range:
    case ErrorCode::evaluation: return 8;
  }
  return 1;
}

}  // namespace evf
