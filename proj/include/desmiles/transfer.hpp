// SPDX-License-Identifier: Apache-2.0
//
// Property optimisation by fine-tuning on matched molecular pairs: pair
// construction from a property scorer, the fine-tuning loop, and
// success/diversity evaluation of generated neighbours.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "desmiles/chem.hpp"
#include "desmiles/fingerprint.hpp"
#include "desmiles/net.hpp"
#include "desmiles/search.hpp"
#include "desmiles/train.hpp"

namespace desmiles::transfer {

enum class Direction { HigherIsBetter, LowerIsBetter };

class PropertyScorer {
 public:
  virtual ~PropertyScorer() = default;
  virtual std::string name() const = 0;
  virtual double score(const chem::MolecularGraph& g) const = 0;
  virtual Direction direction() const = 0;
  /// Score a molecule must reach (in the scorer's direction) to count as a
  /// success, when the property has a natural cut-off.
  virtual std::optional<double> success_threshold() const { return std::nullopt; }

  /// Improvement from `from` to `to`, positive when `to` is better.
  double gain(double from, double to) const { return direction() == Direction::HigherIsBetter ? to - from : from - to; }
  bool meets_threshold(double s) const;
};

/// Number of rings (cyclomatic number); higher is better.
class RingCountScorer : public PropertyScorer {
 public:
  std::string name() const override { return "rings"; }
  double score(const chem::MolecularGraph& g) const override;
  Direction direction() const override { return Direction::HigherIsBetter; }
};

/// 1 when the molecule contains F, Cl, Br or I, else 0; success means 1.
class HalogenScorer : public PropertyScorer {
 public:
  std::string name() const override { return "halogen"; }
  double score(const chem::MolecularGraph& g) const override;
  Direction direction() const override { return Direction::HigherIsBetter; }
  std::optional<double> success_threshold() const override { return 1.0; }
};

/// Docking-like stand-in: a seeded weight per ECFP4 bit, summed over set
/// bits and divided by sqrt(bit count). Lower is better.
class HashScorer : public PropertyScorer {
 public:
  explicit HashScorer(std::uint64_t seed = 1) : seed_(seed) {}
  std::string name() const override { return "hash"; }
  double score(const chem::MolecularGraph& g) const override;
  Direction direction() const override { return Direction::LowerIsBetter; }

 private:
  std::uint64_t seed_;
};

/// "rings", "halogen" or "hash"; throws std::invalid_argument otherwise.
std::unique_ptr<PropertyScorer> make_scorer(const std::string& name, std::uint64_t seed = 1);

struct MatchedPair {
  std::string source_smiles;
  std::string target_smiles;
  double source_score = 0;
  double target_score = 0;
  double similarity = 0;
};

struct PairOptions {
  std::size_t sample_size = 50000;
  double top_fraction = 0.05;
  std::size_t neighbor_cap = 50;
  double sim_threshold = 0.4;
  double gap_threshold = 1.0;
  std::uint64_t seed = 1;
};

class EmptyResult : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sample, score, keep the best top_fraction as parents, and pair each with
/// up to neighbor_cap corpus neighbours (ECFP4 Tanimoto >= sim_threshold,
/// nearest first) that are worse by at least gap_threshold. Pairs run from
/// the weak neighbour to the strong parent. Throws EmptyResult.
std::vector<MatchedPair> build_matched_pairs(std::span<const std::string> corpus, const PropertyScorer& scorer,
                                             const PairOptions& options);

void write_pairs(const std::string& path, std::span<const MatchedPair> pairs);
std::vector<MatchedPair> read_pairs(const std::string& path);

struct FinetuneConfig {
  int epochs = 6;
  double max_lr = 0.001;
  double dividing_factor = 7;
  bool freeze_first_encoder_layer = true;
  int batch_size = 64;
  std::uint64_t rng_seed = 1;

  /// Epochs in [5, 12], max_lr in {0.002, 0.001, 0.0005}, dividing factor
  /// in [5, 10]. Throws std::invalid_argument.
  void validate() const;
  train::TrainConfig to_train_config() const;
};

/// Trains fingerprint(source) -> target on every pair.
std::vector<train::EpochMetrics> finetune(net::Network<float>& model, std::span<const MatchedPair> pairs,
                                          const tokenizer::Vocabulary& vocab, const FinetuneConfig& config,
                                          const train::Callbacks& callbacks = {});

struct Generated {
  std::string smiles;
  double log_prob = 0;
  double score = 0;
  double similarity = 0;
  bool qualifies = false;
};

struct InputReport {
  std::string input;
  double input_score = 0;
  std::vector<Generated> generated;
  /// 1-based index of the first qualifying molecule.
  std::optional<std::size_t> first_success;
  /// Mean pairwise Tanimoto distance among qualifying molecules; absent
  /// with fewer than two.
  std::optional<double> diversity;
};

struct BenchmarkResult {
  std::size_t k = 0;
  double success_rate = 0;
  double diversity = 0;
  std::vector<InputReport> inputs;

  double failure_rate() const { return 1.0 - success_rate; }
  /// Failure rate using only the first `k` molecules of each stream.
  double failure_rate_at(std::size_t k) const;
  std::string to_json() const;
};

/// Score pre-generated streams: a molecule qualifies when its ECFP4
/// Tanimoto to the input is >= sim_threshold and it improves on the input
/// (and reaches the scorer's threshold, if any). Diversity averages over
/// inputs the mean pairwise distance among their qualifying molecules; an
/// input with one qualifying molecule contributes 0, one with none is left
/// out.
BenchmarkResult evaluate_streams(std::span<const std::string> inputs,
                                 std::span<const std::vector<search::Candidate>> streams,
                                 const PropertyScorer& scorer, double sim_threshold, std::size_t k);

/// First k molecules of each input's A* stream, then evaluate_streams.
BenchmarkResult evaluate_improvement(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                                     std::span<const std::string> inputs, const PropertyScorer& scorer,
                                     double sim_threshold, std::size_t k, const search::SearchBudget& budget);

/// The first k molecules of the A* stream for each input.
std::vector<std::vector<search::Candidate>> generate_streams(const net::Network<float>& model,
                                                             const tokenizer::Vocabulary& vocab,
                                                             std::span<const std::string> inputs, std::size_t k,
                                                             const search::SearchBudget& budget);

}  // namespace desmiles::transfer
