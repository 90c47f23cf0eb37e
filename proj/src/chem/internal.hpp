// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "desmiles/chem.hpp"

namespace desmiles::chem::detail {

/// True when `to` is an odd permutation of `from` (both hold the same
/// distinct values).
inline bool odd_permutation(std::span<const int> from, std::span<const int> to) {
  std::vector<int> work(from.begin(), from.end());
  bool odd = false;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (work[i] == to[i]) continue;
    auto it = std::find(work.begin() + static_cast<long>(i) + 1, work.end(), to[i]);
    std::iter_swap(work.begin() + static_cast<long>(i), it);
    odd = !odd;
  }
  return odd;
}

inline Chirality flipped(Chirality c) {
  switch (c) {
    case Chirality::Clockwise: return Chirality::CounterClockwise;
    case Chirality::CounterClockwise: return Chirality::Clockwise;
    default: return c;
  }
}

/// Number of stereo slots an atom exposes: explicit neighbours plus one slot
/// for an implicit hydrogen or lone pair when fewer than four neighbours.
inline bool has_implicit_slot(const MolecularGraph& g, int atom) {
  return g.incident_bonds(atom).size() < 4;
}

}  // namespace desmiles::chem::detail
