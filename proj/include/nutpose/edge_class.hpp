#pragma once

#include <array>
#include <cstdint>

namespace nutpose {

/// Visibility class of a sampled model edge point. Occluded points are kept
/// in the model for display but excluded from scoring.
enum class EdgeClass : std::uint8_t {
  Boundary = 0,       // open mesh border
  Occluding = 1,      // on the silhouette, borders background
  Occluded = 2,       // hidden behind nearer geometry
  HighCurvature = 3,  // sharp crease, visible but interior
};

/// Overlay color per class: Boundary blue, Occluding green, Occluded red,
/// HighCurvature yellow.
inline std::array<std::uint8_t, 3> edge_class_color(EdgeClass c) {
  switch (c) {
    case EdgeClass::Boundary:
      return {0, 0, 255};
    case EdgeClass::Occluding:
      return {0, 255, 0};
    case EdgeClass::Occluded:
      return {255, 0, 0};
    case EdgeClass::HighCurvature:
      return {255, 255, 0};
  }
  return {0, 0, 0};
}

inline const char* edge_class_name(EdgeClass c) {
  switch (c) {
    case EdgeClass::Boundary:
      return "boundary";
    case EdgeClass::Occluding:
      return "occluding";
    case EdgeClass::Occluded:
      return "occluded";
    case EdgeClass::HighCurvature:
      return "high_curvature";
  }
  return "unknown";
}

}  // namespace nutpose
