#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

// Hierarchical partitioning of the probability simplex over K sources.
// Cells are addressed by (height, index), index 1-based within a height,
// children of (h, i) being (h+1, 2i-1) and (h+1, 2i). Indices grow as 2^h,
// hence the arbitrary-precision type.
namespace mixmatch::simplex {

using Mixture = std::vector<double>;  // nonnegative, sums to 1
using BigIndex = boost::multiprecision::cpp_int;

// Checks and canonicalizes raw weights: entries >= -1e-12 are clamped to 0,
// anything more negative is rejected, the sum must be within 1e-9 of 1, and
// the result is renormalized to sum exactly 1.
Mixture validate_mixture(const std::vector<double>& raw);

// Per-coordinate bounds of a coordinate-halving cell (region = box within
// the simplex). Bounds are kept tightened: each coordinate's interval equals
// the coordinate's true range over the region.
struct Box {
  std::vector<double> lo, hi;
};

struct Cell {
  std::vector<Mixture> vertices;  // exactly K, each a valid mixture inside the cell
  int height = 0;
  BigIndex index = 1;
  std::optional<Box> box;  // present iff produced by coordinate halving
};

enum class PartitionKind { kLongestEdgeBisection, kCoordinateHalving };

struct PartitionStrategy {
  PartitionKind kind = PartitionKind::kLongestEdgeBisection;
  uint64_t rng_seed = 0;  // coordinate halving only
};

PartitionKind parse_partition_kind(const std::string& name);  // "bisect"|"coordhalf"

// Whole simplex: vertices are the K basis vectors, height 0, index 1.
Cell root_cell(int k);

// Splits into the two children. Bisection: midpoint of the longest l2 edge
// (ties: lexicographically smallest vertex pair) replaces one endpoint per
// child. Coordinate halving: the region's bounding box splits at the midpoint
// of a seeded-RNG coordinate; deterministic in (rng_seed, height, index).
std::pair<Cell, Cell> split_cell(const Cell& cell, const PartitionStrategy& strategy);

// Centroid of the vertices; lies inside the cell.
Mixture representative(const Cell& cell);

// Max pairwise l1 distance between vertices. Exact cell diameter for
// simplicial cells (l1 distance is convex, so extremes sit at vertices).
double cell_diameter_l1(const Cell& cell);

// sqrt(2K) * (sqrt(3)/2)^(h/(K-1) - 1): decay guarantee for bisection cells.
// Undefined for K = 1 (rejected).
double diameter_bound_l1(int k, int height);

// Stable 64-bit digest of a node index, for RNG key derivation.
uint64_t hash_index(const BigIndex& index);

}  // namespace mixmatch::simplex
