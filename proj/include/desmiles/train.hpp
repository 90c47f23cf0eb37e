// SPDX-License-Identifier: Apache-2.0
//
// Optimisation loop: Adam driven by a one-cycle learning-rate/momentum
// schedule, global gradient-norm clipping, multiplicative weight decay and
// random reversal of half the SMILES in every batch.

#pragma once

#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "desmiles/fingerprint.hpp"
#include "desmiles/net.hpp"
#include "desmiles/tokenizer.hpp"

namespace desmiles::train {

struct TrainConfig {
  int epochs = 128;
  double max_lr = 1e-3;
  double dividing_factor = 10.0;
  double clip_norm = 0.3;
  int batch_size = 64;
  std::uint64_t rng_seed = 1;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  bool freeze_first_encoder_layer = false;
  /// Write a log line every this many optimiser steps (0: epoch lines only).
  int log_every = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct Schedule {
  double lr;
  double momentum;
};

inline constexpr double kPhaseUp = 0.49;
inline constexpr double kPhaseDown = 0.98;
inline constexpr double kMomentumHigh = 0.8;
inline constexpr double kMomentumLow = 0.6;

/// Linear warm-up to max_lr over [0, 0.49) while momentum falls 0.8 -> 0.6,
/// the mirror image over [0.49, 0.98), then an anneal from max_lr/div to
/// max_lr/div^3 at momentum 0.8. Throws std::invalid_argument outside [0, 1].
Schedule one_cycle(double step_fraction, double max_lr, double dividing_factor);

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient() : std::runtime_error("non-finite gradient") {}
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double global_norm(const net::Parameters<float>& grads);
/// Scales grads by clip_norm/norm when the global L2 norm exceeds
/// clip_norm. Returns the norm before clipping. Throws NonFiniteGradient.
double clip_gradient_norm(net::Parameters<float>& grads, double clip_norm);

class Adam {
 public:
  explicit Adam(const net::Parameters<float>& like, double beta2 = 0.99, double eps = 1e-8);

  /// One update with beta1 = momentum, bias-corrected with the current
  /// betas, followed by w <- w * (1 - weight_decay). Tensors of the first
  /// encoder layer are left alone when `freeze_first_layer`.
  void step(net::Parameters<float>& params, const net::Parameters<float>& grads, double lr, double momentum,
            double weight_decay, bool freeze_first_layer);

  std::int64_t steps() const { return t_; }
  net::OptimizerState state() const;
  /// Restores moments saved by state(); ignored entries are not an error.
  void restore(const net::OptimizerState& s);

 private:
  net::Parameters<float> m_, v_;
  double beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Input fingerprint and the molecule the decoder should write. Pretraining
/// uses the molecule itself; fine-tuning a matched pair's target.
struct TrainingPair {
  fingerprint::BitFingerprint fp;
  std::string target;
};

/// input_fingerprint(canonical molecule) -> itself, for each SMILES.
std::vector<TrainingPair> autoencoding_pairs(std::span<const std::string> smiles);

struct EpochMetrics {
  int epoch = 0;
  double nll = 0, ar = 0, tar = 0, total = 0;
  std::size_t steps = 0;
  std::size_t skipped = 0;
  double reversed_fraction = 0;
};

struct Callbacks {
  std::function<void(const EpochMetrics&, const net::Network<float>&, const Adam&)> on_epoch;
  std::ostream* log = nullptr;
};

/// Trains `model` in place. Targets must fit the payload cap in both
/// directions. Steps whose gradient is non-finite are skipped; more than 1%
/// skipped throws TrainingAborted.
std::vector<EpochMetrics> train(net::Network<float>& model, std::span<const TrainingPair> data,
                                const tokenizer::Vocabulary& vocab, const TrainConfig& config,
                                const Callbacks& callbacks = {}, Adam* optimizer = nullptr);

}  // namespace desmiles::train
