// SPDX-License-Identifier: Apache-2.0
//
// Data for landscape plots: ranked decodings over a 2D cut of the embedding
// space (the first encoder layer's output) and the correlation between
// fingerprint distance and embedding distance.

#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "desmiles/net.hpp"
#include "desmiles/search.hpp"

namespace desmiles::landscape {

class DegeneratePlane : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kDegenerateTolerance = 1e-9;

struct PlaneBasis {
  Eigen::VectorXd origin;
  Eigen::VectorXd u, v;
  std::array<Eigen::Vector2d, 3> anchor_coords;

  Eigen::VectorXd point(double x, double y) const { return origin + x * u + y * v; }
  Eigen::Vector2d project(const Eigen::VectorXd& e) const;
};

/// origin = e1, u along e2 - e1, v the part of e3 - e1 orthogonal to u.
/// Throws DegeneratePlane when the anchors are collinear (relative to their
/// spread) within kDegenerateTolerance.
PlaneBasis plane_from_three(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2, const Eigen::VectorXd& e3);

/// Layer-1 embedding of a molecule, in double precision.
Eigen::VectorXd embedding_of(const net::Network<float>& model, const std::string& smiles);

struct RankedMolecule {
  int rank = 0;  // 1-based
  std::string smiles;
  double probability = 0;
};

struct GridCell {
  double x = 0, y = 0;
  /// 0..2 for the cells placed exactly on the anchors, -1 otherwise.
  int anchor = -1;
  std::vector<RankedMolecule> molecules;
};

struct LandscapeGrid {
  int resolution = 0;
  double extent = 0;
  std::vector<GridCell> cells;

  /// Columns x, y, rank, smiles, probability.
  void write_csv(std::ostream& out) const;
};

struct GridOptions {
  /// Points per axis.
  int resolution = 21;
  /// Margin around the anchors' bounding box, as a fraction of its larger
  /// side.
  double extent = 0.5;
  std::size_t top_k = 5;
  search::SearchBudget budget{};
  int workers = 1;
};

/// A resolution x resolution grid over the plane plus one cell at each
/// anchor. Each point is decoded through the second encoder layer and the
/// first top_k molecules of its A* stream are kept with probability
/// exp(log_prob). Throws std::invalid_argument when top_k or resolution is 0.
LandscapeGrid sample_grid(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                          const PlaneBasis& basis, const GridOptions& options);

struct CorrelationOptions {
  double bin_width = 0.1;
  std::size_t pairs_per_bin = 400;
  std::uint64_t seed = 1;
};

struct DistanceSample {
  std::size_t i = 0, j = 0;
  double jaccard = 0;
  double euclidean = 0;
};

struct DistanceBin {
  double lower = 0, upper = 0;
  std::size_t available = 0;
  std::vector<DistanceSample> samples;
};

struct PearsonReport {
  double r = 0;
  std::size_t pairs = 0;
  std::vector<DistanceBin> bins;

  std::string to_json() const;
};

double pearson(std::span<const double> x, std::span<const double> y);

/// Jaccard distance of the input fingerprints against Euclidean distance of
/// layer-1 embeddings over all pairs of `dataset`, sampling up to
/// pairs_per_bin pairs uniformly from each distance bin. Throws
/// std::invalid_argument for fewer than two molecules.
PearsonReport distance_correlation(const net::Network<float>& model, std::span<const std::string> dataset,
                                   const CorrelationOptions& options = {});

}  // namespace desmiles::landscape
