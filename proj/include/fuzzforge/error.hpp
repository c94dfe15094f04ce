#pragma once

#include <stdexcept>
#include <string>

namespace fuzzforge {

enum class errc {
  invalid_argument,
  io_error,
  parse_error,
  empty_sprite,
  invalid_stride,
  empty_catalog,
  dimension_mismatch,
  empty_visible_region,
  placement_exhausted,
  invalid_confidence,
  k_too_large,
  pool_too_small,
  infeasible_budget,
  unknown_image,
  empty_input,
  pairing_mismatch,
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::io_error: return "IoError";
    case errc::parse_error: return "ParseError";
    case errc::empty_sprite: return "EmptySprite";
    case errc::invalid_stride: return "InvalidStride";
    case errc::empty_catalog: return "EmptyCatalog";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::empty_visible_region: return "EmptyVisibleRegion";
    case errc::placement_exhausted: return "PlacementExhausted";
    case errc::invalid_confidence: return "InvalidConfidence";
    case errc::k_too_large: return "KTooLarge";
    case errc::pool_too_small: return "PoolTooSmall";
    case errc::infeasible_budget: return "InfeasibleBudget";
    case errc::unknown_image: return "UnknownImage";
    case errc::empty_input: return "EmptyInput";
    case errc::pairing_mismatch: return "PairingMismatch";
  }
  return "Unknown";
}

/// Every domain failure in the library is reported as this exception.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace fuzzforge
