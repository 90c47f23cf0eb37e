// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "desmiles/chem.hpp"
#include "desmiles/search.hpp"

namespace desmiles::search {

void TokenModel::step_batch(std::span<const DecoderState* const> states, std::span<const TokenId> tokens,
                            std::vector<DecoderState>& next, Eigen::MatrixXf& log_probs) const {
  next.resize(states.size());
  log_probs.resize(vocab_size(), static_cast<Eigen::Index>(states.size()));
  Eigen::VectorXf lp;
  for (std::size_t b = 0; b < states.size(); ++b) {
    step(*states[b], tokens[b], next[b], lp);
    log_probs.col(static_cast<Eigen::Index>(b)) = lp;
  }
}

bool token_allowed(std::size_t path_length, TokenId token, int max_payload_tokens) {
  if (path_length <= 1) return token == tokenizer::kForward || token == tokenizer::kReversed;
  if (token == tokenizer::kEnd) return true;
  if (token < tokenizer::kSpecialCount) return false;
  return path_length - 2 < static_cast<std::size_t>(max_payload_tokens);
}

AStarEnumerator::AStarEnumerator(const TokenModel& model, DecoderState root, const SearchBudget& budget)
    : model_(model), root_state_(std::move(root)), budget_(budget), queue_(Later{this}) {
  nodes_.push_back(Node{-1, tokenizer::kStart, 1, 0.0, nullptr, {}});
  queue_.push(Entry{0.0, -1, 0});
}

std::vector<TokenId> AStarEnumerator::path_of(int node) const {
  std::vector<TokenId> path;
  for (int n = node; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent)
    path.push_back(nodes_[static_cast<std::size_t>(n)].token);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<TokenId> AStarEnumerator::path_of(const Entry& e) const {
  if (e.parent < 0) return {tokenizer::kStart};
  auto path = path_of(e.parent);
  path.push_back(nodes_[static_cast<std::size_t>(e.parent)].children[static_cast<std::size_t>(e.rank)].token);
  return path;
}

bool AStarEnumerator::Later::operator()(const Entry& a, const Entry& b) const {
  if (a.g != b.g) return a.g > b.g;
  return self->path_of(a) > self->path_of(b);
}

DecoderState AStarEnumerator::state_after(int node) {
  const auto& n = nodes_[static_cast<std::size_t>(node)];
  if (n.state) return *n.state;
  DecoderState state = root_state_, next;
  Eigen::VectorXf lp;
  for (TokenId t : path_of(node)) {
    model_.step(state, t, next, lp);
    state = std::move(next);
  }
  return state;
}

void AStarEnumerator::expand(int node) {
  ++branches_;
  const int parent = nodes_[static_cast<std::size_t>(node)].parent;
  const DecoderState before = parent < 0 ? root_state_ : state_after(parent);
  DecoderState after;
  Eigen::VectorXf lp;
  model_.step(before, nodes_[static_cast<std::size_t>(node)].token, after, lp);
  auto& n = nodes_[static_cast<std::size_t>(node)];
  for (TokenId t = 0; t < static_cast<TokenId>(lp.size()); ++t)
    if (token_allowed(static_cast<std::size_t>(n.length), t, budget_.max_payload_tokens))
      n.children.push_back(Child{n.g - static_cast<double>(lp(t)), t});
  std::sort(n.children.begin(), n.children.end(), [](const Child& a, const Child& b) {
    return a.g != b.g ? a.g < b.g : a.token < b.token;
  });
  if (budget_.cache_states) n.state = std::make_unique<DecoderState>(std::move(after));
  if (!n.children.empty()) queue_.push(Entry{n.children[0].g, node, 0});
}

std::optional<RawLeaf> AStarEnumerator::next() {
  while (!queue_.empty() && leaves_ < budget_.max_leaves) {
    const Entry e = queue_.top();
    queue_.pop();
    int node = 0;
    if (e.parent >= 0) {
      const auto& p = nodes_[static_cast<std::size_t>(e.parent)];
      const auto rank = static_cast<std::size_t>(e.rank);
      const Child c = p.children[rank];
      const int length = p.length + 1;
      if (rank + 1 < p.children.size()) queue_.push(Entry{p.children[rank + 1].g, e.parent, e.rank + 1});
      nodes_.push_back(Node{e.parent, c.token, length, c.g, nullptr, {}});
      node = static_cast<int>(nodes_.size()) - 1;
    }
    const auto& n = nodes_[static_cast<std::size_t>(node)];
    if (n.token == tokenizer::kEnd && n.length > 1) {
      ++leaves_;
      RawLeaf leaf{path_of(node), -n.g};
      nodes_.pop_back();
      return leaf;
    }
    if (branches_ >= budget_.max_branches) {
      if (node > 0) nodes_.pop_back();
      continue;
    }
    expand(node);
  }
  return std::nullopt;
}

std::optional<std::string> leaf_molecule(const tokenizer::Vocabulary& vocab, std::span<const TokenId> path) {
  std::string text;
  try {
    text = tokenizer::decode(vocab, path);
  } catch (const tokenizer::MalformedSequence&) {
    return std::nullopt;
  }
  const auto g = chem::try_parse_smiles(text, nullptr);
  if (!g || g->atom_count() == 0) return std::nullopt;
  return chem::write_canonical_smiles(*g);
}

MoleculeStream::MoleculeStream(const TokenModel& model, const tokenizer::Vocabulary& vocab, DecoderState root,
                               const SearchBudget& budget)
    : vocab_(vocab), astar_(model, std::move(root), budget) {}

std::optional<Candidate> MoleculeStream::next() {
  while (auto leaf = astar_.next()) {
    auto smiles = leaf_molecule(vocab_, leaf->path);
    if (!smiles || !seen_.insert(*smiles).second) continue;
    return Candidate{std::move(*smiles), leaf->log_prob};
  }
  return std::nullopt;
}

std::vector<Candidate> astar_stream(const TokenModel& model, const tokenizer::Vocabulary& vocab,
                                    const DecoderState& root, const SearchBudget& budget,
                                    std::size_t max_results) {
  MoleculeStream stream(model, vocab, root, budget);
  std::vector<Candidate> out;
  while (out.size() < max_results) {
    auto c = stream.next();
    if (!c) break;
    out.push_back(std::move(*c));
  }
  return out;
}

namespace {

bool raw_before(const RawLeaf& a, const RawLeaf& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.path < b.path;
}

std::vector<Candidate> to_candidates(const tokenizer::Vocabulary& vocab, const std::vector<RawLeaf>& leaves) {
  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  for (const auto& leaf : leaves) {
    auto smiles = leaf_molecule(vocab, leaf.path);
    if (smiles && seen.insert(*smiles).second) out.push_back({std::move(*smiles), leaf.log_prob});
  }
  return out;
}

}  // namespace

std::vector<RawLeaf> beam_search_raw(const TokenModel& model, const DecoderState& root, std::size_t width,
                                     int max_payload_tokens) {
  if (width < 1) throw std::invalid_argument("beam width must be at least 1");
  struct Hyp {
    std::vector<TokenId> path;
    double cost;
    DecoderState state;  // before the last token of path
  };
  struct Option {
    double cost;
    std::size_t hyp;
    TokenId token;
  };
  std::vector<Hyp> beam{{{tokenizer::kStart}, 0.0, root}};
  std::vector<RawLeaf> pool;
  std::vector<DecoderState> next;
  Eigen::MatrixXf lp;
  while (!beam.empty()) {
    std::vector<const DecoderState*> states;
    std::vector<TokenId> tokens;
    for (const auto& h : beam) {
      states.push_back(&h.state);
      tokens.push_back(h.path.back());
    }
    model.step_batch(states, tokens, next, lp);
    std::vector<Option> options;
    for (std::size_t b = 0; b < beam.size(); ++b)
      for (TokenId t = 0; t < static_cast<TokenId>(lp.rows()); ++t)
        if (token_allowed(beam[b].path.size(), t, max_payload_tokens))
          options.push_back({beam[b].cost - static_cast<double>(lp(t, static_cast<Eigen::Index>(b))), b, t});
    const auto better = [&](const Option& x, const Option& y) {
      if (x.cost != y.cost) return x.cost < y.cost;
      if (x.hyp != y.hyp) return beam[x.hyp].path < beam[y.hyp].path;
      return x.token < y.token;
    };
    const std::size_t keep = std::min(width, options.size());
    std::partial_sort(options.begin(), options.begin() + static_cast<std::ptrdiff_t>(keep), options.end(), better);
    std::vector<Hyp> survivors;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& o = options[k];
      auto path = beam[o.hyp].path;
      path.push_back(o.token);
      if (o.token == tokenizer::kEnd) pool.push_back({std::move(path), -o.cost});
      else survivors.push_back({std::move(path), o.cost, next[o.hyp]});
    }
    beam = std::move(survivors);
  }
  std::sort(pool.begin(), pool.end(), raw_before);
  return pool;
}

std::vector<Candidate> beam_search(const TokenModel& model, const tokenizer::Vocabulary& vocab,
                                   const DecoderState& root, std::size_t width, int max_payload_tokens) {
  return to_candidates(vocab, beam_search_raw(model, root, width, max_payload_tokens));
}

std::vector<std::optional<RawLeaf>> random_sample_raw(const TokenModel& model, const DecoderState& root,
                                                      std::size_t n_tries, std::uint64_t seed,
                                                      int max_payload_tokens) {
  if (n_tries < 1) throw std::invalid_argument("n_tries must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  struct Try {
    std::size_t index;
    std::vector<TokenId> path;
    double log_prob;
    DecoderState state;
  };
  std::vector<std::optional<RawLeaf>> out(n_tries);
  std::vector<Try> active;
  for (std::size_t i = 0; i < n_tries; ++i) active.push_back({i, {tokenizer::kStart}, 0.0, root});
  std::vector<DecoderState> next;
  Eigen::MatrixXf lp;
  while (!active.empty()) {
    std::vector<const DecoderState*> states;
    std::vector<TokenId> tokens;
    for (const auto& t : active) {
      states.push_back(&t.state);
      tokens.push_back(t.path.back());
    }
    model.step_batch(states, tokens, next, lp);
    std::vector<Try> still;
    for (std::size_t b = 0; b < active.size(); ++b) {
      auto& tr = active[b];
      const auto col = lp.col(static_cast<Eigen::Index>(b));
      double total = 0;
      for (Eigen::Index k = 0; k < col.size(); ++k) total += std::exp(static_cast<double>(col(k)));
      const double u = uniform(rng) * total;
      double acc = 0;
      TokenId pick = static_cast<TokenId>(col.size()) - 1;
      for (Eigen::Index k = 0; k < col.size(); ++k) {
        acc += std::exp(static_cast<double>(col(k)));
        if (u < acc) {
          pick = static_cast<TokenId>(k);
          break;
        }
      }
      if (!token_allowed(tr.path.size(), pick, max_payload_tokens)) continue;
      tr.path.push_back(pick);
      tr.log_prob += static_cast<double>(col(pick));
      if (pick == tokenizer::kEnd) {
        out[tr.index] = RawLeaf{std::move(tr.path), tr.log_prob};
        continue;
      }
      tr.state = std::move(next[b]);
      still.push_back(std::move(tr));
    }
    active = std::move(still);
  }
  return out;
}

std::vector<Candidate> random_sample(const TokenModel& model, const tokenizer::Vocabulary& vocab,
                                     const DecoderState& root, std::size_t n_tries, std::uint64_t seed,
                                     int max_payload_tokens) {
  std::vector<RawLeaf> leaves;
  for (auto& s : random_sample_raw(model, root, n_tries, seed, max_payload_tokens))
    if (s) leaves.push_back(std::move(*s));
  std::sort(leaves.begin(), leaves.end(), raw_before);
  return to_candidates(vocab, leaves);
}

std::vector<Candidate> ensemble_stream(std::span<const std::vector<Candidate>> streams, std::size_t n_positions) {
  std::vector<Candidate> out;
  std::unordered_set<std::string> taken;
  for (std::size_t k = 0; k < n_positions; ++k) {
    std::vector<const Candidate*> at;
    for (const auto& s : streams)
      if (k < s.size()) at.push_back(&s[k]);
    std::stable_sort(at.begin(), at.end(),
                     [](const Candidate* a, const Candidate* b) { return a->log_prob > b->log_prob; });
    for (const Candidate* c : at)
      if (taken.insert(c->smiles).second) {
        out.push_back(*c);
        break;
      }
  }
  return out;
}

}  // namespace desmiles::search
