// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <json.hpp>

#include "desmiles/landscape.hpp"

namespace desmiles::landscape {

Eigen::Vector2d PlaneBasis::project(const Eigen::VectorXd& e) const {
  const Eigen::VectorXd d = e - origin;
  return {d.dot(u), d.dot(v)};
}

PlaneBasis plane_from_three(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2, const Eigen::VectorXd& e3) {
  if (e1.size() != e2.size() || e1.size() != e3.size() || e1.size() < 2) {
    throw std::invalid_argument("anchor embeddings must share a dimension of at least 2");
  }
  const Eigen::VectorXd d2 = e2 - e1;
  const Eigen::VectorXd d3 = e3 - e1;
  const double scale = std::max(d2.norm(), d3.norm());
  if (scale == 0 || d2.norm() <= kDegenerateTolerance * scale) throw DegeneratePlane("anchors coincide");
  PlaneBasis b;
  b.origin = e1;
  b.u = d2 / d2.norm();
  const Eigen::VectorXd w = d3 - d3.dot(b.u) * b.u;
  if (w.norm() <= kDegenerateTolerance * scale) throw DegeneratePlane("anchors are collinear");
  b.v = w / w.norm();
  b.anchor_coords = {b.project(e1), b.project(e2), b.project(e3)};
  return b;
}

Eigen::VectorXd embedding_of(const net::Network<float>& model, const std::string& smiles) {
  return model.embed(fingerprint::input_fingerprint(chem::parse_smiles(smiles))).cast<double>();
}

void LandscapeGrid::write_csv(std::ostream& out) const {
  out << "x,y,rank,smiles,probability\n";
  out.precision(10);
  for (const auto& c : cells) {
    for (const auto& m : c.molecules) {
      out << c.x << ',' << c.y << ',' << m.rank << ',' << m.smiles << ',' << m.probability << '\n';
    }
  }
}

LandscapeGrid sample_grid(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                          const PlaneBasis& basis, const GridOptions& options) {
  if (options.top_k == 0) throw std::invalid_argument("top_k must be positive");
  if (options.resolution < 1) throw std::invalid_argument("resolution must be positive");
  LandscapeGrid grid;
  grid.resolution = options.resolution;
  grid.extent = options.extent;

  double x0 = basis.anchor_coords[0].x(), x1 = x0, y0 = basis.anchor_coords[0].y(), y1 = y0;
  for (const auto& a : basis.anchor_coords) {
    x0 = std::min(x0, a.x());
    x1 = std::max(x1, a.x());
    y0 = std::min(y0, a.y());
    y1 = std::max(y1, a.y());
  }
  const double margin = options.extent * std::max(x1 - x0, y1 - y0);
  x0 -= margin;
  x1 += margin;
  y0 -= margin;
  y1 += margin;
  const int n = options.resolution;
  auto at = [n](double lo, double hi, int i) { return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1); };
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) grid.cells.push_back({at(x0, x1, ix), at(y0, y1, iy), -1, {}});
  }
  for (int a = 0; a < 3; ++a) {
    grid.cells.push_back({basis.anchor_coords[a].x(), basis.anchor_coords[a].y(), a, {}});
  }

  const search::NetworkModel tm(model);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < grid.cells.size(); i = next++) {
      auto& cell = grid.cells[i];
      const net::Vec<float> point = basis.point(cell.x, cell.y).cast<float>();
      const auto stream = search::astar_stream(tm, vocab, model.initial_state(point), options.budget, options.top_k);
      for (std::size_t r = 0; r < stream.size(); ++r) {
        cell.molecules.push_back({static_cast<int>(r + 1), stream[r].smiles, std::exp(stream[r].log_prob)});
      }
    }
  };
  const int workers = std::max(1, options.workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return grid;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

PearsonReport distance_correlation(const net::Network<float>& model, std::span<const std::string> dataset,
                                   const CorrelationOptions& options) {
  if (dataset.size() < 2) throw std::invalid_argument("distance correlation needs at least two molecules");
  if (!(options.bin_width > 0)) throw std::invalid_argument("bin_width must be positive");
  std::vector<fingerprint::BitFingerprint> fps;
  std::vector<Eigen::VectorXd> emb;
  for (const auto& s : dataset) {
    const auto fp = fingerprint::input_fingerprint(chem::parse_smiles(s));
    emb.push_back(model.embed(fp).cast<double>());
    fps.push_back(fp);
  }

  const auto n_bins = static_cast<std::size_t>(std::ceil(1.0 / options.bin_width - 1e-9));
  PearsonReport report;
  report.bins.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    report.bins[b].lower = static_cast<double>(b) * options.bin_width;
    report.bins[b].upper = std::min(1.0, static_cast<double>(b + 1) * options.bin_width);
  }
  std::mt19937_64 rng(options.seed);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = i + 1; j < dataset.size(); ++j) {
      const double d = 1.0 - fingerprint::tanimoto(fps[i], fps[j]);
      const auto b = std::min(n_bins - 1, static_cast<std::size_t>(std::floor(d / options.bin_width)));
      auto& bin = report.bins[b];
      const std::size_t seen = bin.available++;
      if (bin.samples.size() < options.pairs_per_bin) {
        bin.samples.push_back({i, j, d, 0});
      } else {
        const auto slot = std::uniform_int_distribution<std::size_t>(0, seen)(rng);
        if (slot < options.pairs_per_bin) bin.samples[slot] = {i, j, d, 0};
      }
    }
  }

  std::vector<double> xs, ys;
  for (auto& bin : report.bins) {
    for (auto& s : bin.samples) {
      s.euclidean = (emb[s.i] - emb[s.j]).norm();
      xs.push_back(s.jaccard);
      ys.push_back(s.euclidean);
    }
  }
  report.pairs = xs.size();
  report.r = pearson(xs, ys);
  return report;
}

std::string PearsonReport::to_json() const {
  nlohmann::ordered_json j;
  j["pearson_r"] = r;
  j["pairs"] = pairs;
  nlohmann::ordered_json bs = nlohmann::ordered_json::array();
  for (const auto& b : bins) {
    nlohmann::ordered_json e;
    e["lower"] = b.lower;
    e["upper"] = b.upper;
    e["available"] = b.available;
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (const auto& s : b.samples) samples.push_back({s.i, s.j, s.jaccard, s.euclidean});
    e["samples"] = samples;
    bs.push_back(e);
  }
  j["bins"] = bs;
  return j.dump(1);
}

}  // namespace desmiles::landscape
