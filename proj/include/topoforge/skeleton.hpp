#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace topoforge {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Zhang-Suen iterative thinning; pixels outside the image count as background.
Mask thin(const Mask& mask);

// Number of set pixels in the 8-neighbourhood of (r, c).
int neighbour_count(const Mask& mask, int r, int c);

// Number of 0 -> 1 transitions walking the 8-neighbourhood once around.
int crossing_number(const Mask& mask, int r, int c);

// Euclidean distance from each set pixel centre to the nearest background
// pixel centre (pixels outside the image are not background). Zero on background.
Eigen::MatrixXd distance_to_background(const Mask& mask);

// 8-connected component labels (0 = background, 1..n); returns n.
int label_components(const Mask& mask, Eigen::MatrixXi& labels);

}  // namespace topoforge
