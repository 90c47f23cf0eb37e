// SPDX-License-Identifier: Apache-2.0
//
// Decoding a fingerprint into ranked molecules: best-first (A*, h = 0)
// enumeration of the token tree, beam search, ancestral sampling and the
// per-position merge of several models' streams.
//
// The tree is rooted at START. Its first level is the two direction tokens;
// below that every node has one child per payload token plus END, except at
// the payload cap where END is the only child. Leaves are the END nodes.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "desmiles/net.hpp"
#include "desmiles/tokenizer.hpp"

namespace desmiles::search {

using net::DecoderState;
using tokenizer::TokenId;

class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual int vocab_size() const = 0;
  /// Consume `token` from `state`; `log_probs` is the distribution over the
  /// token that follows.
  virtual void step(const DecoderState& state, TokenId token, DecoderState& next,
                    Eigen::VectorXf& log_probs) const = 0;
  /// Column b of `log_probs` belongs to states[b]. The default loops over
  /// step().
  virtual void step_batch(std::span<const DecoderState* const> states, std::span<const TokenId> tokens,
                          std::vector<DecoderState>& next, Eigen::MatrixXf& log_probs) const;
};

class NetworkModel : public TokenModel {
 public:
  explicit NetworkModel(const net::Network<float>& net) : net_(net) {}
  int vocab_size() const override { return net_.config().vocab_size; }
  void step(const DecoderState& state, TokenId token, DecoderState& next, Eigen::VectorXf& log_probs) const override {
    net_.step(state, token, next, log_probs);
  }
  void step_batch(std::span<const DecoderState* const> states, std::span<const TokenId> tokens,
                  std::vector<DecoderState>& next, Eigen::MatrixXf& log_probs) const override {
    net_.step_batch(states, tokens, next, log_probs);
  }
  const net::Network<float>& network() const { return net_; }

 private:
  const net::Network<float>& net_;
};

struct SearchBudget {
  std::size_t max_branches = 5000;
  std::size_t max_leaves = 10000;
  int max_payload_tokens = tokenizer::kMaxPayloadTokens;
  /// Keep each expanded node's decoder state; otherwise recompute it from
  /// the root when needed. Results are identical.
  bool cache_states = true;
};

/// A complete token path START ... END and its log probability.
struct RawLeaf {
  std::vector<TokenId> path;
  double log_prob = 0;
};

/// Children allowed under a node whose path has `path_length` tokens.
bool token_allowed(std::size_t path_length, TokenId token, int max_payload_tokens);

/// Emits leaves in nondecreasing cost (ties: lexicographic token path).
/// Siblings are generated lazily: an expanded node pushes only its best
/// child, and each popped child pushes its next sibling.
class AStarEnumerator {
 public:
  AStarEnumerator(const TokenModel& model, DecoderState root, const SearchBudget& budget);

  /// Next leaf, or nothing once max_leaves leaves were emitted or the queue
  /// is empty. After max_branches expansions, non-leaf nodes are dropped.
  std::optional<RawLeaf> next();

  std::size_t branches() const { return branches_; }
  std::size_t leaves() const { return leaves_; }

 private:
  struct Child {
    double g;
    TokenId token;
  };
  struct Node {
    int parent;
    TokenId token;
    int length;
    double g;
    std::unique_ptr<DecoderState> state;
    std::vector<Child> children;  // sorted by (g, token)
  };
  struct Entry {
    double g;
    int parent;
    int rank;
  };
  struct Later {
    const AStarEnumerator* self;
    bool operator()(const Entry& a, const Entry& b) const;
  };

  std::vector<TokenId> path_of(int node) const;
  std::vector<TokenId> path_of(const Entry& e) const;
  void expand(int node);
  DecoderState state_after(int node);

  const TokenModel& model_;
  DecoderState root_state_;
  SearchBudget budget_;
  std::vector<Node> nodes_;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::size_t branches_ = 0;
  std::size_t leaves_ = 0;
};

/// A decoded, valid molecule: canonical SMILES and the log probability of
/// the token path that produced it.
struct Candidate {
  std::string smiles;
  double log_prob = 0;
};

/// Decode a leaf to canonical SMILES; nothing when the tokens do not spell a
/// valid molecule.
std::optional<std::string> leaf_molecule(const tokenizer::Vocabulary& vocab, std::span<const TokenId> path);

/// Valid, previously unseen molecules from an A* enumeration, in order.
class MoleculeStream {
 public:
  MoleculeStream(const TokenModel& model, const tokenizer::Vocabulary& vocab, DecoderState root,
                 const SearchBudget& budget);
  std::optional<Candidate> next();
  const AStarEnumerator& enumerator() const { return astar_; }

 private:
  const tokenizer::Vocabulary& vocab_;
  AStarEnumerator astar_;
  std::unordered_set<std::string> seen_;
};

/// Up to `max_results` molecules of the A* stream.
std::vector<Candidate> astar_stream(const TokenModel& model, const tokenizer::Vocabulary& vocab,
                                    const DecoderState& root, const SearchBudget& budget,
                                    std::size_t max_results);

/// Beam of `width` partial paths; finished paths leave the beam for the
/// result pool. Pool sorted by log probability (ties: token path).
std::vector<RawLeaf> beam_search_raw(const TokenModel& model, const DecoderState& root, std::size_t width,
                                     int max_payload_tokens = tokenizer::kMaxPayloadTokens);
std::vector<Candidate> beam_search(const TokenModel& model, const tokenizer::Vocabulary& vocab,
                                   const DecoderState& root, std::size_t width,
                                   int max_payload_tokens = tokenizer::kMaxPayloadTokens);

/// `n_tries` ancestral samples. A try that draws a token outside the tree
/// (a special token mid-sequence, or no END at the cap) yields nothing.
std::vector<std::optional<RawLeaf>> random_sample_raw(const TokenModel& model, const DecoderState& root,
                                                      std::size_t n_tries, std::uint64_t seed,
                                                      int max_payload_tokens = tokenizer::kMaxPayloadTokens);
/// Valid samples, deduplicated, sorted by log probability.
std::vector<Candidate> random_sample(const TokenModel& model, const tokenizer::Vocabulary& vocab,
                                     const DecoderState& root, std::size_t n_tries, std::uint64_t seed,
                                     int max_payload_tokens = tokenizer::kMaxPayloadTokens);

/// At each position k < n_positions take the most probable k-th molecule
/// across `streams` (ties to the earlier stream) that is not yet in the
/// output, falling back to the next most probable at that position.
std::vector<Candidate> ensemble_stream(std::span<const std::vector<Candidate>> streams, std::size_t n_positions);

}  // namespace desmiles::search
