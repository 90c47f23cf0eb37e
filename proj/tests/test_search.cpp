// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "desmiles/chem.hpp"
#include "desmiles/search.hpp"

using namespace desmiles;
using namespace desmiles::search;
using tokenizer::kEnd;
using tokenizer::kForward;
using tokenizer::kReversed;
using tokenizer::kSpecialCount;
using tokenizer::kStart;

namespace {

// The state records the consumed path; the next-token distribution is a
// seeded pseudo-random function of that path.
class ToyModel : public TokenModel {
 public:
  ToyModel(int vocab, std::uint64_t seed, double sharpness = 2.0) : vocab_(vocab), seed_(seed), sharp_(sharpness) {}
  int vocab_size() const override { return vocab_; }
  void step(const DecoderState& state, TokenId token, DecoderState& next, Eigen::VectorXf& log_probs) const override {
    const auto& prev = state.h.empty() ? Eigen::VectorXf() : state.h[0];
    Eigen::VectorXf path(prev.size() + 1);
    path.head(prev.size()) = prev;
    path[prev.size()] = static_cast<float>(token);
    next.h = {path};
    next.c = {};
    std::uint64_t key = seed_;
    for (Eigen::Index i = 0; i < path.size(); ++i) key = key * 1000003u + static_cast<std::uint64_t>(path[i]) + 1;
    std::mt19937_64 rng(key);
    std::normal_distribution<double> n(0.0, sharp_);
    Eigen::VectorXd logits(vocab_);
    for (int t = 0; t < vocab_; ++t) logits[t] = n(rng);
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    log_probs = (logits.array() - lse).cast<float>();
  }

 private:
  int vocab_;
  std::uint64_t seed_;
  double sharp_;
};

std::vector<float> next_log_probs(const TokenModel& m, const std::vector<TokenId>& path) {
  DecoderState s, n;
  Eigen::VectorXf lp;
  for (const TokenId t : path) {
    m.step(s, t, n, lp);
    s = n;
  }
  return {lp.data(), lp.data() + lp.size()};
}

// Every leaf of the tree, in the order the A* enumeration must produce.
std::vector<RawLeaf> brute_force(const TokenModel& m, int cap) {
  std::vector<RawLeaf> out;
  std::vector<std::pair<std::vector<TokenId>, double>> stack = {{{kStart}, 0.0}};
  while (!stack.empty()) {
    auto [path, g] = stack.back();
    stack.pop_back();
    if (path.back() == kEnd) {
      out.push_back({path, -g});
      continue;
    }
    const auto lp = next_log_probs(m, path);
    for (int t = 0; t < m.vocab_size(); ++t)
      if (token_allowed(path.size(), t, cap)) {
        auto p = path;
        p.push_back(t);
        stack.push_back({p, g - static_cast<double>(lp[static_cast<std::size_t>(t)])});
      }
  }
  std::sort(out.begin(), out.end(), [](const RawLeaf& a, const RawLeaf& b) {
    return a.log_prob != b.log_prob ? a.log_prob > b.log_prob : a.path < b.path;
  });
  return out;
}

std::size_t leaf_count(int payload_tokens, int cap) {
  std::size_t n = 0, level = 1;
  for (int k = 0; k <= cap; ++k) {
    n += level;
    level *= static_cast<std::size_t>(payload_tokens);
  }
  return 2 * n;
}

}  // namespace

TEST_CASE("tree grammar") {
  CHECK(token_allowed(1, kForward, 27));
  CHECK(token_allowed(1, kReversed, 27));
  CHECK_FALSE(token_allowed(1, kEnd, 27));
  CHECK_FALSE(token_allowed(1, kSpecialCount, 27));
  CHECK(token_allowed(2, kEnd, 27));
  CHECK(token_allowed(2, kSpecialCount, 27));
  CHECK_FALSE(token_allowed(2, kStart, 27));
  CHECK_FALSE(token_allowed(2, kForward, 27));
  CHECK(token_allowed(28, kSpecialCount + 1, 27));
  CHECK_FALSE(token_allowed(29, kSpecialCount + 1, 27));
  CHECK(token_allowed(29, kEnd, 27));
}

TEST_CASE("A* emits every leaf in brute-force order on toy models") {
  for (const auto& [vocab, cap, seed] : {std::tuple{6, 4, 1}, std::tuple{7, 3, 2}, std::tuple{6, 3, 3}, std::tuple{5, 4, 4}}) {
    CAPTURE(vocab);
    CAPTURE(seed);
    ToyModel m(vocab, static_cast<std::uint64_t>(seed));
    const auto expected = brute_force(m, cap);
    REQUIRE(expected.size() == leaf_count(vocab - kSpecialCount, cap));
    for (const bool cache : {true, false}) {
      SearchBudget b;
      b.max_payload_tokens = cap;
      b.max_branches = 1000000;
      b.cache_states = cache;
      AStarEnumerator a(m, {}, b);
      std::vector<RawLeaf> got;
      while (auto leaf = a.next()) got.push_back(*leaf);
      REQUIRE(got.size() == expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].path == expected[i].path);
        CHECK(got[i].log_prob == expected[i].log_prob);
      }
    }
  }
}

TEST_CASE("A* respects the leaf and branch budgets") {
  ToyModel m(7, 9);
  SearchBudget b;
  b.max_payload_tokens = 4;
  b.max_leaves = 7;
  AStarEnumerator a(m, {}, b);
  std::size_t n = 0;
  while (a.next()) ++n;
  CHECK(n == 7);
  CHECK(a.leaves() == 7);

  const auto expected = brute_force(m, 4);
  b.max_leaves = 100000;
  b.max_branches = 5;
  AStarEnumerator limited(m, {}, b);
  std::vector<RawLeaf> got;
  while (auto leaf = limited.next()) got.push_back(*leaf);
  CHECK(limited.branches() <= 5);
  CHECK_FALSE(got.empty());
  for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].log_prob <= got[i - 1].log_prob);
  for (const auto& leaf : got) CHECK(std::find_if(expected.begin(), expected.end(), [&](const RawLeaf& e) {
                                       return e.path == leaf.path;
                                     }) != expected.end());
}

TEST_CASE("beam of width one is greedy decoding") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ToyModel m(7, seed);
    std::vector<TokenId> path = {kStart};
    double lp_sum = 0;
    while (path.back() != kEnd) {
      const auto lp = next_log_probs(m, path);
      int best = -1;
      for (int t = 0; t < m.vocab_size(); ++t)
        if (token_allowed(path.size(), t, 4) && (best < 0 || lp[static_cast<std::size_t>(t)] > lp[static_cast<std::size_t>(best)]))
          best = t;
      lp_sum += lp[static_cast<std::size_t>(best)];
      path.push_back(best);
    }
    const auto beam = beam_search_raw(m, {}, 1, 4);
    REQUIRE(beam.size() == 1);
    CHECK(beam[0].path == path);
    CHECK(beam[0].log_prob == doctest::Approx(lp_sum).epsilon(1e-12));
  }
}

TEST_CASE("a beam wider than the tree returns every leaf in order") {
  ToyModel m(6, 17);
  const auto expected = brute_force(m, 4);
  const auto beam = beam_search_raw(m, {}, 10000, 4);
  REQUIRE(beam.size() == expected.size());
  for (std::size_t i = 0; i < beam.size(); ++i) {
    CHECK(beam[i].path == expected[i].path);
    CHECK(beam[i].log_prob == doctest::Approx(expected[i].log_prob).epsilon(1e-12));
  }
}

TEST_CASE("sampling frequencies match path probabilities") {
  ToyModel m(6, 23, 1.0);
  const int cap = 2;
  const auto leaves = brute_force(m, cap);
  const std::size_t n = 100000;
  const auto draws = random_sample_raw(m, {}, n, 99, cap);
  REQUIRE(draws.size() == n);
  std::map<std::vector<TokenId>, std::size_t> counts;
  std::size_t failed = 0;
  for (const auto& d : draws) {
    if (!d) {
      ++failed;
      continue;
    }
    ++counts[d->path];
  }
  double mass = 0;
  for (const auto& leaf : leaves) {
    const double p = std::exp(leaf.log_prob);
    mass += p;
    const double expected = p * static_cast<double>(n);
    const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
    CAPTURE(p);
    CHECK(std::abs(static_cast<double>(counts[leaf.path]) - expected) <= 4 * sigma + 1);
  }
  const double pf = 1 - mass;
  CHECK(std::abs(static_cast<double>(failed) - pf * static_cast<double>(n)) <=
        4 * std::sqrt(static_cast<double>(n) * pf * (1 - pf)) + 1);
  for (const auto& d : draws)
    if (d) CHECK(d->log_prob == doctest::Approx(std::find_if(leaves.begin(), leaves.end(), [&](const RawLeaf& l) {
                                                  return l.path == d->path;
                                                })->log_prob));
  CHECK(random_sample_raw(m, {}, 50, 99, cap).size() == 50);
}

TEST_CASE("molecule stream keeps the first occurrence of each valid molecule") {
  const auto vocab = tokenizer::train_bpe(std::vector<std::string>{"CO", "C(O)"}, kSpecialCount + 5);
  const int v = static_cast<int>(vocab.size());
  ToyModel m(v, 31);
  const int cap = 3;
  const auto leaves = brute_force(m, cap);
  std::vector<Candidate> expected;
  for (const auto& leaf : leaves) {
    const auto text = tokenizer::decode(vocab, std::span<const TokenId>(leaf.path));
    const auto canon = chem::canonicalize(text);
    if (!canon || canon->empty()) continue;
    if (std::none_of(expected.begin(), expected.end(), [&](const Candidate& c) { return c.smiles == *canon; }))
      expected.push_back({*canon, leaf.log_prob});
  }
  SearchBudget b;
  b.max_payload_tokens = cap;
  b.max_branches = 1000000;
  const auto got = astar_stream(m, vocab, {}, b, 1000);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].smiles == expected[i].smiles);
    CHECK(got[i].log_prob == expected[i].log_prob);
  }
  CHECK(astar_stream(m, vocab, {}, b, 3).size() == std::min<std::size_t>(3, expected.size()));
}

TEST_CASE("ensemble merge") {
  const std::vector<std::vector<Candidate>> streams = {
      {{"A", -1.0}, {"B", -2.0}, {"D", -2.5}},
      {{"B", -0.5}, {"C", -3.0}},
  };
  const auto merged = ensemble_stream(streams, 3);
  REQUIRE(merged.size() == 3);
  CHECK(merged[0].smiles == "B");
  CHECK(merged[1].smiles == "C");
  CHECK(merged[2].smiles == "D");

  const std::vector<std::vector<Candidate>> tied = {{{"X", -1.0}}, {{"Y", -1.0}}};
  CHECK(ensemble_stream(tied, 1)[0].smiles == "X");

  const std::vector<std::vector<Candidate>> dup = {{{"X", -1.0}, {"X", -2.0}}, {{"X", -1.5}}};
  CHECK(ensemble_stream(dup, 2).size() == 1);
  CHECK(ensemble_stream(std::vector<std::vector<Candidate>>{}, 5).empty());
}
