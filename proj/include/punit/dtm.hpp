#pragma once

#include "punit/scalar_grid.hpp"
#include "punit/voxel_grid.hpp"

namespace punit {

// Distance-to-measure field over the grid. For each voxel the m nearest
// solid voxels (by Euclidean center distance, in voxel index units) are
// averaged as d(x) = sqrt((sum of the first ceil(m)-1 squared distances
// + (m - ceil(m) + 1) * last squared distance) / m). Non-integer m > 0
// weighs the ceil(m)-th neighbor fractionally. Ties in distance are
// broken by linear voxel index, so results are reproducible bit for bit.
ScalarGrid dtm_field(const VoxelGrid& g, double m = 5.0);

// L1 distance (in grid steps) to the nearest solid voxel, via
// multi-source BFS over the 6-connected grid.
ScalarGrid manhattan_field(const VoxelGrid& g);

} // namespace punit
