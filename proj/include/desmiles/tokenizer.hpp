// SPDX-License-Identifier: Apache-2.0
//
// Byte-pair-encoding vocabulary over SMILES characters with four reserved
// structural tokens, and direction-aware encode/decode.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace desmiles::tokenizer {

using TokenId = std::int32_t;

inline constexpr TokenId kStart = 0;
inline constexpr TokenId kForward = 1;
inline constexpr TokenId kReversed = 2;
inline constexpr TokenId kEnd = 3;
inline constexpr int kSpecialCount = 4;
/// Payload tokens allowed per sequence (START, direction and END excluded).
inline constexpr int kMaxPayloadTokens = 27;
inline constexpr int kDefaultVocabSize = 8000;

class UnknownCharacter : public std::runtime_error {
 public:
  explicit UnknownCharacter(char c)
      : std::runtime_error(std::string("character not in vocabulary: '") + c + "'") {}
};

class TooLong : public std::runtime_error {
 public:
  explicit TooLong(std::size_t payload)
      : std::runtime_error("payload of " + std::to_string(payload) + " tokens exceeds " +
                           std::to_string(kMaxPayloadTokens)) {}
};

class MalformedSequence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  bool reversed = false;

  /// Tokens between the direction token and END (or the end of ids).
  std::size_t payload_size() const;
};

class Vocabulary {
 public:
  /// Token strings for ids 0..size()-1.
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::span<const std::string> tokens() const { return tokens_; }
  std::span<const char> base_chars() const { return base_chars_; }
  std::span<const std::pair<std::string, std::string>> merges() const { return merges_; }
  /// Set by train_bpe when the corpus ran out of pairs before `vocab_size`.
  bool truncated() const { return truncated_; }
  std::size_t requested_size() const { return requested_size_; }

  /// Segment `text` into payload token ids by applying merges in training
  /// order. Throws UnknownCharacter.
  std::vector<TokenId> segment(std::string_view text) const;

  /// Versioned JSON text: format_version, vocab_size, specials, base_chars,
  /// merges.
  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  /// 64-bit FNV-1a over to_json(); checkpoints record it.
  std::uint64_t content_hash() const;

  static Vocabulary build(std::vector<char> base_chars,
                          std::vector<std::pair<std::string, std::string>> merges,
                          std::size_t requested_size, bool truncated);

 private:
  std::vector<std::string> tokens_;
  std::vector<char> base_chars_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::string, TokenId> ids_;
  std::map<std::pair<TokenId, TokenId>, std::pair<std::size_t, TokenId>> merge_rank_;
  TokenId char_id_[256] = {};
  std::size_t requested_size_ = 0;
  bool truncated_ = false;
};

/// Standard BPE: repeatedly merge the most frequent adjacent pair, ties to
/// the lexicographically smaller (left, right) pair, until the vocabulary
/// (specials included) reaches `vocab_size` or no pairs remain. Throws
/// std::invalid_argument when the corpus is empty or vocab_size does not
/// exceed base characters + 4.
Vocabulary train_bpe(std::span<const std::string> corpus, std::size_t vocab_size);
/// train_bpe over every SMILES and its character reversal, so merges serve
/// both decoding directions.
Vocabulary train_bpe_both_directions(std::span<const std::string> corpus, std::size_t vocab_size);

/// START, FORWARD|REVERSED, payload, END. When `reversed`, the character
/// reversal of `smiles` is segmented. Throws UnknownCharacter and TooLong.
TokenSequence encode(const Vocabulary& v, std::string_view smiles, bool reversed);

/// Concatenated payload, flipped back to forward order when reversed.
/// Throws MalformedSequence for missing END or misplaced specials.
std::string decode(const Vocabulary& v, const TokenSequence& t);
/// Same as decode() for a raw id path.
std::string decode(const Vocabulary& v, std::span<const TokenId> ids);

}  // namespace desmiles::tokenizer
