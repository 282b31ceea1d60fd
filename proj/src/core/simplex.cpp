#include "core/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "core/rng.hpp"

namespace mixmatch::simplex {
namespace {

constexpr double kClampTol = 1e-12;
constexpr double kSumTol = 1e-9;
constexpr double kExtentTol = 1e-9;

void tighten(Box& box) {
  const size_t k = box.lo.size();
  // Interval reduction propagates, so iterate to a fixed point. Each pass
  // only shrinks intervals; K+1 passes are always enough in practice and the
  // cap guards against float ping-pong.
  for (size_t pass = 0; pass < k + 1; ++pass) {
    double sum_lo = 0, sum_hi = 0;
    for (size_t c = 0; c < k; ++c) {
      sum_lo += box.lo[c];
      sum_hi += box.hi[c];
    }
    bool changed = false;
    for (size_t c = 0; c < k; ++c) {
      const double tlo = std::max(box.lo[c], 1.0 - (sum_hi - box.hi[c]));
      const double thi = std::min(box.hi[c], 1.0 - (sum_lo - box.lo[c]));
      if (tlo > box.lo[c] + 1e-15) {
        box.lo[c] = tlo;
        changed = true;
      }
      if (thi < box.hi[c] - 1e-15) {
        box.hi[c] = thi;
        changed = true;
      }
    }
    if (!changed) break;
  }
}

// Point of the region maximizing coordinate `toward`: that coordinate at its
// upper bound, the rest water-filled from their lower bounds in index order.
Mixture box_vertex(const Box& box, size_t toward) {
  const size_t k = box.lo.size();
  Mixture v = box.lo;
  v[toward] = box.hi[toward];
  double deficit = 1.0;
  for (size_t c = 0; c < k; ++c) deficit -= v[c];
  for (size_t c = 0; c < k && deficit > 0; ++c) {
    if (c == toward) continue;
    const double add = std::min(deficit, box.hi[c] - v[c]);
    v[c] += add;
    deficit -= add;
  }
  return validate_mixture(v);
}

std::vector<Mixture> box_vertices(const Box& box) {
  std::vector<Mixture> out;
  out.reserve(box.lo.size());
  for (size_t c = 0; c < box.lo.size(); ++c) out.push_back(box_vertex(box, c));
  return out;
}

double sq_l2(const Mixture& a, const Mixture& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Mixture validate_mixture(const std::vector<double>& raw) {
  if (raw.empty()) throw std::invalid_argument("mixture: empty weight vector");
  Mixture w = raw;
  double sum = 0;
  for (double& v : w) {
    if (!std::isfinite(v)) throw std::invalid_argument("mixture: non-finite weight");
    if (v < 0) {
      if (v < -kClampTol)
        throw std::invalid_argument("mixture: negative weight " + std::to_string(v));
      v = 0;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTol)
    throw std::invalid_argument("mixture: weights sum to " + std::to_string(sum));
  for (double& v : w) v /= sum;
  return w;
}

PartitionKind parse_partition_kind(const std::string& name) {
  if (name == "bisect") return PartitionKind::kLongestEdgeBisection;
  if (name == "coordhalf") return PartitionKind::kCoordinateHalving;
  throw std::invalid_argument("unknown partition strategy '" + name + "'");
}

Cell root_cell(int k) {
  if (k < 1) throw std::invalid_argument("root_cell: k must be >= 1");
  Cell cell;
  cell.vertices.assign(k, Mixture(k, 0.0));
  for (int i = 0; i < k; ++i) cell.vertices[i][i] = 1.0;
  cell.height = 0;
  cell.index = 1;
  return cell;
}

std::pair<Cell, Cell> split_cell(const Cell& cell, const PartitionStrategy& strategy) {
  const size_t k = cell.vertices.size();
  if (k < 2) throw std::invalid_argument("split_cell: cannot split a point (k = 1)");

  Cell left, right;
  left.height = right.height = cell.height + 1;
  left.index = cell.index * 2 - 1;
  right.index = cell.index * 2;

  if (strategy.kind == PartitionKind::kLongestEdgeBisection) {
    size_t best_a = 0, best_b = 1;
    double best = -1.0;
    for (size_t a = 0; a + 1 < k; ++a) {
      for (size_t b = a + 1; b < k; ++b) {
        const double d2 = sq_l2(cell.vertices[a], cell.vertices[b]);
        if (d2 > best) {  // strict: first maximum keeps the smallest (a, b)
          best = d2;
          best_a = a;
          best_b = b;
        }
      }
    }
    Mixture mid(k);
    for (size_t i = 0; i < k; ++i)
      mid[i] = 0.5 * (cell.vertices[best_a][i] + cell.vertices[best_b][i]);
    left.vertices = cell.vertices;
    left.vertices[best_b] = mid;  // keeps endpoint a
    right.vertices = cell.vertices;
    right.vertices[best_a] = mid;  // keeps endpoint b
    return {std::move(left), std::move(right)};
  }

  // Coordinate halving. Cells carry their box; the root synthesizes one.
  Box box;
  if (cell.box) {
    box = *cell.box;
  } else if (cell.height == 0) {
    box.lo.assign(k, 0.0);
    box.hi.assign(k, 1.0);
  } else {
    throw std::invalid_argument("split_cell: coordinate halving requires box cells");
  }
  tighten(box);

  std::vector<size_t> eligible;
  for (size_t c = 0; c < k; ++c)
    if (box.hi[c] - box.lo[c] > kExtentTol) eligible.push_back(c);
  if (eligible.empty())
    throw std::runtime_error("split_cell: degenerate cell, no coordinate to halve");

  rng::Stream stream(rng::derive(
      rng::derive(rng::derive(strategy.rng_seed, rng::kSaltStrategy),
                  static_cast<uint64_t>(cell.height)),
      hash_index(cell.index)));
  const size_t c = eligible[stream.next_below(eligible.size())];
  const double mid = 0.5 * (box.lo[c] + box.hi[c]);

  Box lo_box = box, hi_box = box;
  lo_box.hi[c] = mid;
  hi_box.lo[c] = mid;
  tighten(lo_box);
  tighten(hi_box);
  left.vertices = box_vertices(lo_box);
  left.box = std::move(lo_box);
  right.vertices = box_vertices(hi_box);
  right.box = std::move(hi_box);
  return {std::move(left), std::move(right)};
}

Mixture representative(const Cell& cell) {
  const size_t k = cell.vertices.size();
  Mixture rep(k, 0.0);
  for (const Mixture& v : cell.vertices)
    for (size_t i = 0; i < k; ++i) rep[i] += v[i];
  for (double& x : rep) x /= static_cast<double>(k);
  return validate_mixture(rep);
}

double cell_diameter_l1(const Cell& cell) {
  double best = 0;
  for (size_t a = 0; a + 1 < cell.vertices.size(); ++a) {
    for (size_t b = a + 1; b < cell.vertices.size(); ++b) {
      double d = 0;
      for (size_t i = 0; i < cell.vertices[a].size(); ++i)
        d += std::abs(cell.vertices[a][i] - cell.vertices[b][i]);
      best = std::max(best, d);
    }
  }
  return best;
}

double diameter_bound_l1(int k, int height) {
  if (k < 2) throw std::invalid_argument("diameter_bound_l1: needs k >= 2");
  if (height < 0) throw std::invalid_argument("diameter_bound_l1: negative height");
  const double ratio = std::sqrt(3.0) / 2.0;
  return std::sqrt(2.0 * k) *
         std::pow(ratio, static_cast<double>(height) / (k - 1) - 1.0);
}

uint64_t hash_index(const BigIndex& index) {
  if (index < 0) throw std::invalid_argument("hash_index: negative index");
  std::vector<uint64_t> limbs;
  if (index == 0) {
    limbs.push_back(0);
  } else {
    boost::multiprecision::export_bits(index, std::back_inserter(limbs), 64);
  }
  uint64_t h = 0x8000000000000000ULL | limbs.size();
  for (uint64_t limb : limbs) h = rng::derive(h, limb);
  return h;
}

}  // namespace mixmatch::simplex
