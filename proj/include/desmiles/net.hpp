// SPDX-License-Identifier: Apache-2.0
//
// Fingerprint encoder and weight-dropped LSTM decoder with tied output
// weights. Scalar is float for training and inference; double is used by
// the finite-difference gradient tests.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "desmiles/fingerprint.hpp"
#include "desmiles/tokenizer.hpp"

namespace desmiles::net {

using tokenizer::TokenId;

class InvalidToken : public std::out_of_range {
 public:
  explicit InvalidToken(TokenId id) : std::out_of_range("invalid token id " + std::to_string(id)) {}
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  int input_bits = 4096;
  int embed_dim = 400;
  int hidden_dim = 2000;
  int num_layers = 5;
  int vocab_size = 8000;
  double p_enc = 0.1;
  double p_e = 0.014;
  double p_i = 0.175;
  double p_h = 0.105;
  double p_o = 0.07;
  double dropconnect = 0.14;
  double ar_coeff = 2.0;
  double tar_coeff = 1.0;
  double weight_decay_factor = 1e-7;

  /// Input and hidden width of recurrent layer l. The first layer's hidden
  /// width matches the encoder output; the last layer's matches embed_dim.
  int layer_input(int l) const { return l == 0 ? embed_dim : layer_hidden(l - 1); }
  int layer_hidden(int l) const { return l == num_layers - 1 ? embed_dim : hidden_dim; }

  /// Throws std::invalid_argument on non-positive sizes, fewer than two
  /// layers, or dropout rates outside [0, 1).
  void validate() const;
  void zero_dropout();

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct LayerParams {
  Mat<S> w_ih;  // 4H x in, gate rows ordered input, forget, cell, output
  Mat<S> w_hh;  // 4H x H
  Vec<S> b_ih;
  Vec<S> b_hh;
};

template <typename S>
struct Parameters {
  Vec<S> bn1_gamma, bn1_beta;
  Mat<S> enc1_w;
  Vec<S> enc1_b;
  Vec<S> bn2_gamma, bn2_beta;
  Mat<S> enc2_w;
  Vec<S> enc2_b;
  /// embed_dim x vocab_size; column k embeds token k and is also the output
  /// weight row for token k.
  Mat<S> embedding;
  std::vector<LayerParams<S>> layers;

  /// Same shapes, all zero.
  Parameters zeros_like() const;
  std::size_t count() const;
};

/// Calls f(name, tensor_a, tensor_b, ...) for every trainable tensor of the
/// given parameter sets, in a fixed order.
template <typename F, typename First, typename... Rest>
void for_each_tensor(F&& f, First& a, Rest&... rest) {
  f(std::string("encoder.bn1.weight"), a.bn1_gamma, rest.bn1_gamma...);
  f(std::string("encoder.bn1.bias"), a.bn1_beta, rest.bn1_beta...);
  f(std::string("encoder.linear1.weight"), a.enc1_w, rest.enc1_w...);
  f(std::string("encoder.linear1.bias"), a.enc1_b, rest.enc1_b...);
  f(std::string("encoder.bn2.weight"), a.bn2_gamma, rest.bn2_gamma...);
  f(std::string("encoder.bn2.bias"), a.bn2_beta, rest.bn2_beta...);
  f(std::string("encoder.linear2.weight"), a.enc2_w, rest.enc2_w...);
  f(std::string("encoder.linear2.bias"), a.enc2_b, rest.enc2_b...);
  f(std::string("decoder.embedding"), a.embedding, rest.embedding...);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const std::string p = "decoder.lstm" + std::to_string(l) + ".";
    f(p + "w_ih", a.layers[l].w_ih, rest.layers[l].w_ih...);
    f(p + "w_hh", a.layers[l].w_hh, rest.layers[l].w_hh...);
    f(p + "b_ih", a.layers[l].b_ih, rest.layers[l].b_ih...);
    f(p + "b_hh", a.layers[l].b_hh, rest.layers[l].b_hh...);
  }
}

/// True for the tensors of the fingerprint-to-embedding layer (first batch
/// norm and first affine map), which fine-tuning may freeze.
bool in_first_encoder_layer(const std::string& tensor_name);

template <typename S>
struct RunningStats {
  Vec<S> mean1, var1, mean2, var2;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct DecoderState {
  std::vector<Eigen::VectorXf> h, c;
};

template <typename S>
struct LossBreakdown {
  S nll = 0, ar = 0, tar = 0, total = 0;
  std::size_t tokens = 0;
};

/// One teacher-forced training example: the full token sequence START,
/// direction, payload, END.
struct Example {
  const fingerprint::BitFingerprint* fp;
  std::span<const TokenId> tokens;
};

struct ForwardOptions {
  /// Dropout masks on; otherwise every rate is treated as zero.
  bool dropout = true;
  /// Fold this batch's statistics into the running batch-norm estimates.
  bool update_running_stats = true;
  /// First encoder layer in inference mode (running statistics) with no
  /// gradient; used when that layer is frozen.
  bool freeze_first_encoder_layer = false;
};

template <typename S>
class Network {
 public:
  Network() = default;
  /// Uniform(+-1/sqrt(fan_in)) affine and recurrent weights, normal(0, 0.01)
  /// embeddings, forget-gate input bias 1, unit batch-norm scale.
  Network(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  Parameters<S>& params() { return params_; }
  const Parameters<S>& params() const { return params_; }
  RunningStats<S>& running() { return running_; }
  const RunningStats<S>& running() const { return running_; }

  std::size_t parameter_count() const { return params_.count(); }

  // Inference (running batch-norm statistics, no dropout).

  /// Output of the first encoder layer. Throws fingerprint::WidthMismatch.
  Vec<S> embed(const fingerprint::BitFingerprint& fp) const;
  /// Second encoder layer on an embedding; hidden and cell of the first
  /// recurrent layer both take its output, other layers start at zero.
  DecoderState initial_state(const Vec<S>& embedding) const;
  DecoderState encode(const fingerprint::BitFingerprint& fp) const { return initial_state(embed(fp)); }

  /// One decoder step; `log_probs` receives the normalised log distribution
  /// over the vocabulary. Throws InvalidToken.
  void step(const DecoderState& state, TokenId token, DecoderState& next, Eigen::VectorXf& log_probs) const;
  /// Column b of `log_probs` is the step for states[b], tokens[b].
  void step_batch(std::span<const DecoderState* const> states, std::span<const TokenId> tokens,
                  std::vector<DecoderState>& next, Eigen::MatrixXf& log_probs) const;

  /// Sum of log p(token_t | prefix) over every token after START.
  double sequence_log_prob(const fingerprint::BitFingerprint& fp, std::span<const TokenId> tokens) const;

  // Training.

  /// Teacher-forced regularised loss over a batch; when `grads` is non-null
  /// it receives d(total)/d(parameter) (overwritten, not accumulated).
  /// Masks are drawn from `rng_seed`. Throws ShapeMismatch.
  LossBreakdown<S> forward_backward(std::span<const Example> batch, std::uint64_t rng_seed,
                                    const ForwardOptions& options, Parameters<S>* grads);

  template <typename T>
  Network<T> cast() const;

 private:
  template <typename T>
  friend class Network;

  ModelConfig config_;
  Parameters<S> params_;
  RunningStats<S> running_;
};

template <typename S>
template <typename T>
Network<T> Network<S>::cast() const {
  Network<T> out;
  out.config_ = config_;
  out.params_.layers.resize(params_.layers.size());
  for_each_tensor([](const std::string&, auto& dst, const auto& src) { dst = src.template cast<T>(); },
                  out.params_, params_);
  out.running_.mean1 = running_.mean1.template cast<T>();
  out.running_.var1 = running_.var1.template cast<T>();
  out.running_.mean2 = running_.mean2.template cast<T>();
  out.running_.var2 = running_.var2.template cast<T>();
  return out;
}

/// Trainable parameter count for `config` without allocating it.
std::size_t parameter_count(const ModelConfig& config);

/// Dense 0/1 column for a fingerprint.
template <typename S>
Vec<S> fingerprint_vector(const fingerprint::BitFingerprint& fp);

// Checkpoints.

/// Tensors of an optimiser, keyed by name (e.g. "adam.m.decoder.embedding").
struct OptimizerState {
  std::int64_t step = 0;
  std::vector<std::pair<std::string, Mat<float>>> tensors;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Network<float>& net, std::uint64_t vocab_hash,
                     const OptimizerState* optimizer = nullptr);
/// Throws CheckpointError on a malformed file or, when `expected_vocab_hash`
/// is non-zero, on a vocabulary mismatch.
Network<float> load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash,
                               OptimizerState* optimizer = nullptr, std::uint64_t* vocab_hash = nullptr);

/// Order-sensitive FNV-1a over the raw bytes of the selected tensors; used
/// for freeze checks and determinism tests.
std::uint64_t tensor_checksum(const Parameters<float>& p, bool first_encoder_layer_only = false);

}  // namespace desmiles::net
