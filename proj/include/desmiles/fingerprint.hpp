// SPDX-License-Identifier: Apache-2.0
//
// Extended-connectivity (Morgan) fingerprints folded into fixed-width bit
// vectors, and Tanimoto similarity between them.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "desmiles/chem.hpp"

namespace desmiles::fingerprint {

inline constexpr std::size_t kComponentBits = 2048;
inline constexpr std::size_t kInputBits = 2 * kComponentBits;

class WidthMismatch : public std::invalid_argument {
 public:
  WidthMismatch(std::size_t a, std::size_t b)
      : std::invalid_argument("fingerprint width mismatch: " + std::to_string(a) + " vs " +
                              std::to_string(b)) {}
};

class BitFingerprint {
 public:
  BitFingerprint() = default;
  explicit BitFingerprint(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  std::size_t width() const { return width_; }
  void set(std::size_t bit) { words_[bit / 64] |= std::uint64_t{1} << (bit % 64); }
  bool test(std::size_t bit) const { return (words_[bit / 64] >> (bit % 64)) & 1U; }
  std::size_t popcount() const;
  std::span<const std::uint64_t> words() const { return words_; }
  /// Indices of set bits, ascending.
  std::vector<int> on_bits() const;

  /// Lowercase hex, width/4 characters; character i holds bits 4i..4i+3 with
  /// bit 4i as the most significant bit of the nibble.
  std::string to_hex() const;
  static BitFingerprint from_hex(std::string_view hex);

  /// This vector followed by `tail`.
  BitFingerprint concat(const BitFingerprint& tail) const;

  friend bool operator==(const BitFingerprint&, const BitFingerprint&) = default;

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Fixed 32-bit mixing step used for all identifiers: murmur3's finaliser
/// applied to h ^ (v * 0x9E3779B1 + 0x7F4A7C15 + (h << 6) + (h >> 2)).
std::uint32_t hash_combine(std::uint32_t h, std::uint32_t v);
inline constexpr std::uint32_t kHashSeed = 0x5D3E5A1Fu;

/// Unfolded, deduplicated identifiers (sorted) for radius 0..`radius`.
/// Initial invariants: atomic number, heavy degree, total hydrogens, formal
/// charge, ring membership, aromaticity, plus the numbering-independent
/// parity from chem::invariant_parity when `use_chirality`.
std::vector<std::uint32_t> morgan_identifiers(const chem::MolecularGraph& g, int radius,
                                              bool use_chirality);

/// Identifiers folded modulo `width` (a power of two).
BitFingerprint morgan_fingerprint(const chem::MolecularGraph& g, int radius, std::size_t width,
                                  bool use_chirality);

/// ECFP4 (radius 2, 2048 bits, chirality on).
BitFingerprint ecfp4(const chem::MolecularGraph& g);
/// The 4096-bit model input: ECFP4 followed by ECFP6 (radius 3), both 2048
/// bits with chirality.
BitFingerprint input_fingerprint(const chem::MolecularGraph& g);

/// |a & b| / |a | b|; 1.0 when both are empty. Throws WidthMismatch.
double tanimoto(const BitFingerprint& a, const BitFingerprint& b);

}  // namespace desmiles::fingerprint
