#pragma once

#include "mfscale/flow.hpp"
#include "mfscale/wall_law.hpp"

namespace mfscale {

struct MeshSettings {
  // High: first centre at this y+ (from the provisional u_tau)
  double high_first_yplus = 0.5;
  // Low: first centre at this fraction of the height, clamped to
  // [low_min_yplus, low_max_yplus] in wall units
  double low_first_height = 0.06;
  double low_min_yplus = 35.0;
  double low_max_yplus = 270.0;
  // default High node count = high_nodes_per_wall_unit * Re_tau
  double high_nodes_per_wall_unit = 1.2;
  Eigen::Index min_high_nodes = 64;
  // High default / Low default
  double node_ratio = 1.9;
  double max_stretching = 1.25;
  WallLawConstants wall;
};

inline constexpr Eigen::Index kMinNodes = 8;

double first_center_height(const FlowCase& c, Fidelity f, const MeshSettings& s = {});
Eigen::Index default_node_count(const FlowCase& c, Fidelity f, const MeshSettings& s = {});

// Wall cell [0, 2 y0] with its centre y0 as node 0; node 1 at 3 y0; the
// remaining spacings grow geometrically so the last node lands on y = 1.
Mesh build_mesh(const FlowCase& c, Fidelity f, Eigen::Index n_nodes, const MeshSettings& s = {});
Mesh build_mesh(const FlowCase& c, Fidelity f, const MeshSettings& s = {});

}  // namespace mfscale
