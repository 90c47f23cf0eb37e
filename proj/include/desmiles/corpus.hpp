// SPDX-License-Identifier: Apache-2.0
//
// Corpus preparation: the drug-like filter pipeline over raw SMILES and a
// seeded generator of synthetic drug-like series for desk-scale runs.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "desmiles/tokenizer.hpp"

namespace desmiles::corpus {

struct FilterStats {
  std::size_t input = 0;
  std::size_t unparsable = 0;
  std::size_t rejected_filter = 0;
  std::size_t duplicates = 0;
  std::size_t kept = 0;
};

/// Parse, keep the largest fragment, apply the element/size filter and
/// canonicalise. Output is deduplicated, in first-seen order.
std::vector<std::string> filter_corpus(std::span<const std::string> raw, FilterStats* stats = nullptr);

/// Molecules whose payload fits kMaxPayloadTokens in both directions and
/// whose characters are all known to `vocab`.
std::vector<std::string> filter_by_token_length(const tokenizer::Vocabulary& vocab,
                                                std::span<const std::string> smiles,
                                                std::size_t* dropped = nullptr);

/// Fraction of `smiles` with payload <= kMaxPayloadTokens (forward
/// direction), for reporting.
double payload_coverage(const tokenizer::Vocabulary& vocab, std::span<const std::string> smiles);

struct SyntheticOptions {
  std::size_t count = 10000;
  std::uint64_t seed = 1;
  /// Decorated variants generated per scaffold.
  int variants_per_series = 8;
};

/// Canonical SMILES of synthetic molecules assembled from ring cores,
/// linkers and substituents (including halogens and a few stereo groups),
/// organised as series sharing a scaffold. All pass the drug filter.
std::vector<std::string> synthetic_corpus(const SyntheticOptions& options);

}  // namespace desmiles::corpus
