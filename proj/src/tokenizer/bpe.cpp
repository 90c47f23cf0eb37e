// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "desmiles/tokenizer.hpp"

namespace desmiles::tokenizer {

namespace {

constexpr int kFormatVersion = 1;
const char* const kSpecialNames[kSpecialCount] = {"<start>", "<forward>", "<reversed>", "<end>"};

using Pair = std::pair<TokenId, TokenId>;

}  // namespace

std::size_t TokenSequence::payload_size() const {
  if (ids.size() < 2) return 0;
  const std::size_t tail = ids.back() == kEnd && ids.size() >= 3 ? 1 : 0;
  return ids.size() - 2 - tail;
}

Vocabulary Vocabulary::build(std::vector<char> base_chars,
                             std::vector<std::pair<std::string, std::string>> merges,
                             std::size_t requested_size, bool truncated) {
  Vocabulary v;
  v.requested_size_ = requested_size;
  v.truncated_ = truncated;
  for (const char* name : kSpecialNames) v.tokens_.emplace_back(name);
  std::fill(std::begin(v.char_id_), std::end(v.char_id_), -1);
  for (char c : base_chars) {
    const std::string s(1, c);
    if (v.ids_.count(s)) throw std::invalid_argument("duplicate base character");
    const auto id = static_cast<TokenId>(v.tokens_.size());
    v.tokens_.push_back(s);
    v.ids_[s] = id;
    v.char_id_[static_cast<unsigned char>(c)] = id;
  }
  for (std::size_t rank = 0; rank < merges.size(); ++rank) {
    const auto& [left, right] = merges[rank];
    const auto l = v.ids_.find(left);
    const auto r = v.ids_.find(right);
    if (l == v.ids_.end() || r == v.ids_.end())
      throw std::invalid_argument("merge refers to an unknown token");
    const std::string joined = left + right;
    auto it = v.ids_.find(joined);
    TokenId id;
    if (it == v.ids_.end()) {
      id = static_cast<TokenId>(v.tokens_.size());
      v.tokens_.push_back(joined);
      v.ids_[joined] = id;
    } else {
      id = it->second;
    }
    v.merge_rank_.emplace(Pair{l->second, r->second}, std::make_pair(rank, id));
  }
  v.base_chars_ = std::move(base_chars);
  v.merges_ = std::move(merges);
  return v;
}

std::vector<TokenId> Vocabulary::segment(std::string_view text) const {
  std::vector<TokenId> symbols;
  symbols.reserve(text.size());
  for (char c : text) {
    const TokenId id = char_id_[static_cast<unsigned char>(c)];
    if (id < 0) throw UnknownCharacter(c);
    symbols.push_back(id);
  }
  for (;;) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    Pair best{-1, -1};
    TokenId result = -1;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
      if (it != merge_rank_.end() && it->second.first < best_rank) {
        best_rank = it->second.first;
        best = it->first;
        result = it->second.second;
      }
    }
    if (result < 0) break;
    std::vector<TokenId> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == best.first && symbols[i + 1] == best.second) {
        next.push_back(result);
        ++i;
      } else {
        next.push_back(symbols[i]);
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["vocab_size"] = tokens_.size();
  j["requested_size"] = requested_size_;
  j["truncated"] = truncated_;
  j["specials"] = std::vector<std::string>(std::begin(kSpecialNames), std::end(kSpecialNames));
  std::vector<std::string> base;
  for (char c : base_chars_) base.emplace_back(1, c);
  j["base_chars"] = base;
  auto merges = nlohmann::ordered_json::array();
  for (const auto& [l, r] : merges_) merges.push_back({l, r});
  j["merges"] = merges;
  return j.dump(1);
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported vocabulary format version");
  const auto specials = j.at("specials").get<std::vector<std::string>>();
  if (specials.size() != kSpecialCount ||
      !std::equal(specials.begin(), specials.end(), std::begin(kSpecialNames)))
    throw std::runtime_error("vocabulary specials do not match");
  std::vector<char> base;
  for (const auto& s : j.at("base_chars").get<std::vector<std::string>>()) {
    if (s.size() != 1) throw std::runtime_error("base character entries must be one character");
    base.push_back(s[0]);
  }
  std::vector<std::pair<std::string, std::string>> merges;
  for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
  auto v = build(std::move(base), std::move(merges), j.value("requested_size", std::size_t{0}),
                 j.value("truncated", false));
  if (v.size() != j.at("vocab_size").get<std::size_t>())
    throw std::runtime_error("vocabulary size does not match its merges");
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path);
  out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocabulary train_bpe(std::span<const std::string> corpus, std::size_t vocab_size) {
  if (corpus.empty()) throw std::invalid_argument("empty BPE corpus");
  std::map<std::string, long> word_counts;
  for (const auto& s : corpus) ++word_counts[s];

  std::set<char> charset;
  for (const auto& [w, n] : word_counts) charset.insert(w.begin(), w.end());
  std::vector<char> base(charset.begin(), charset.end());
  if (vocab_size <= base.size() + kSpecialCount)
    throw std::invalid_argument("vocab_size must exceed base characters + 4");

  // Working token table mirrors Vocabulary::build's id assignment.
  std::vector<std::string> tokens(kSpecialNames, kSpecialNames + kSpecialCount);
  std::map<std::string, TokenId> ids;
  TokenId char_id[256];
  std::fill(std::begin(char_id), std::end(char_id), -1);
  for (char c : base) {
    ids[std::string(1, c)] = static_cast<TokenId>(tokens.size());
    char_id[static_cast<unsigned char>(c)] = static_cast<TokenId>(tokens.size());
    tokens.emplace_back(1, c);
  }

  std::vector<std::vector<TokenId>> words;
  std::vector<long> counts;
  for (const auto& [w, n] : word_counts) {
    std::vector<TokenId> sym;
    for (char c : w) sym.push_back(char_id[static_cast<unsigned char>(c)]);
    words.push_back(std::move(sym));
    counts.push_back(n);
  }

  std::map<Pair, long> pair_counts;
  std::map<Pair, std::set<std::size_t>> where;
  const auto add_pairs = [&](std::size_t wi, long sign) {
    const auto& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const Pair p{w[i], w[i + 1]};
      pair_counts[p] += sign * counts[wi];
      if (sign > 0) where[p].insert(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_pairs(wi, 1);

  std::vector<std::pair<std::string, std::string>> merges;
  bool truncated = false;
  while (tokens.size() < vocab_size) {
    const std::pair<const Pair, long>* best = nullptr;
    for (const auto& entry : pair_counts) {
      if (entry.second <= 0) continue;
      if (best == nullptr || entry.second > best->second) {
        best = &entry;
        continue;
      }
      if (entry.second == best->second) {
        const auto& a = entry.first;
        const auto& b = best->first;
        const auto ka = std::tie(tokens[static_cast<std::size_t>(a.first)], tokens[static_cast<std::size_t>(a.second)]);
        const auto kb = std::tie(tokens[static_cast<std::size_t>(b.first)], tokens[static_cast<std::size_t>(b.second)]);
        if (ka < kb) best = &entry;
      }
    }
    if (best == nullptr) {
      truncated = true;
      break;
    }
    const Pair pair = best->first;
    const std::string joined = tokens[static_cast<std::size_t>(pair.first)] + tokens[static_cast<std::size_t>(pair.second)];
    merges.emplace_back(tokens[static_cast<std::size_t>(pair.first)], tokens[static_cast<std::size_t>(pair.second)]);
    TokenId merged;
    if (auto it = ids.find(joined); it != ids.end()) {
      merged = it->second;
    } else {
      merged = static_cast<TokenId>(tokens.size());
      ids[joined] = merged;
      tokens.push_back(joined);
    }
    const auto affected = where[pair];
    for (std::size_t wi : affected) {
      auto& w = words[wi];
      add_pairs(wi, -1);
      std::vector<TokenId> next;
      next.reserve(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (i + 1 < w.size() && w[i] == pair.first && w[i + 1] == pair.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w[i]);
        }
      }
      w = std::move(next);
      add_pairs(wi, 1);
    }
    where.erase(pair);
    for (auto it = pair_counts.begin(); it != pair_counts.end();) {
      if (it->second <= 0) it = pair_counts.erase(it);
      else ++it;
    }
  }
  return Vocabulary::build(std::move(base), std::move(merges), vocab_size, truncated);
}

Vocabulary train_bpe_both_directions(std::span<const std::string> corpus, std::size_t vocab_size) {
  std::vector<std::string> text(corpus.begin(), corpus.end());
  text.reserve(2 * corpus.size());
  for (const auto& s : corpus) text.emplace_back(s.rbegin(), s.rend());
  return train_bpe(text, vocab_size);
}

TokenSequence encode(const Vocabulary& v, std::string_view smiles, bool reversed) {
  std::string text(smiles);
  if (reversed) std::reverse(text.begin(), text.end());
  const auto payload = v.segment(text);
  if (payload.size() > static_cast<std::size_t>(kMaxPayloadTokens)) throw TooLong(payload.size());
  TokenSequence t;
  t.reversed = reversed;
  t.ids.reserve(payload.size() + 3);
  t.ids.push_back(kStart);
  t.ids.push_back(reversed ? kReversed : kForward);
  t.ids.insert(t.ids.end(), payload.begin(), payload.end());
  t.ids.push_back(kEnd);
  return t;
}

std::string decode(const Vocabulary& v, std::span<const TokenId> ids) {
  if (ids.size() < 3) throw MalformedSequence("sequence shorter than START, direction, END");
  if (ids.front() != kStart) throw MalformedSequence("sequence does not begin with START");
  if (ids[1] != kForward && ids[1] != kReversed) throw MalformedSequence("missing direction token");
  if (ids.back() != kEnd) throw MalformedSequence("missing END");
  std::string text;
  for (std::size_t i = 2; i + 1 < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (id < kSpecialCount || static_cast<std::size_t>(id) >= v.size())
      throw MalformedSequence("special or out-of-range token inside payload");
    text += v.token(id);
  }
  if (ids[1] == kReversed) std::reverse(text.begin(), text.end());
  return text;
}

std::string decode(const Vocabulary& v, const TokenSequence& t) {
  if (t.ids.size() >= 2 && (t.ids[1] == kReversed) != t.reversed)
    throw MalformedSequence("direction flag does not match the direction token");
  return decode(v, std::span<const TokenId>(t.ids));
}

}  // namespace desmiles::tokenizer
