// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive graph-isomorphism check used as an independent oracle for the
// canonical writer: backtracking over label-compatible atom mappings, then
// a stereo comparison of every complete mapping.

#pragma once

#include <algorithm>
#include <vector>

#include "desmiles/chem.hpp"

namespace oracle {

using desmiles::chem::BondStereo;
using desmiles::chem::Chirality;
using desmiles::chem::MolecularGraph;

inline int permutation_parity(std::vector<int> seq, const std::vector<int>& target) {
  int swaps = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] == target[i]) continue;
    const auto j = static_cast<std::size_t>(std::find(seq.begin() + static_cast<long>(i), seq.end(), target[i]) -
                                            seq.begin());
    if (j == seq.size()) return -1;
    std::swap(seq[i], seq[j]);
    ++swaps;
  }
  return swaps % 2;
}

class Isomorphism {
 public:
  Isomorphism(const MolecularGraph& a, const MolecularGraph& b) : a_(a), b_(b) {}

  bool run() {
    if (a_.atom_count() != b_.atom_count() || a_.bond_count() != b_.bond_count()) return false;
    map_.assign(a_.atom_count(), -1);
    used_.assign(b_.atom_count(), false);
    order_.clear();
    std::vector<bool> queued(a_.atom_count(), false);
    for (int s = 0; s < static_cast<int>(a_.atom_count()); ++s) {
      if (queued[static_cast<std::size_t>(s)]) continue;
      std::vector<int> q{s};
      queued[static_cast<std::size_t>(s)] = true;
      for (std::size_t k = 0; k < q.size(); ++k) {
        order_.push_back(q[k]);
        for (int n : a_.neighbors(q[k])) {
          if (!queued[static_cast<std::size_t>(n)]) {
            queued[static_cast<std::size_t>(n)] = true;
            q.push_back(n);
          }
        }
      }
    }
    budget_ = 2'000'000;
    return extend(0);
  }

 private:
  bool label_match(int u, int v) const {
    const auto& x = a_.atom(u);
    const auto& y = b_.atom(v);
    return x.atomic_number == y.atomic_number && x.formal_charge == y.formal_charge && x.aromatic == y.aromatic &&
           a_.total_hydrogens(u) == b_.total_hydrogens(v) && a_.neighbors(u).size() == b_.neighbors(v).size() &&
           (x.chirality == Chirality::None) == (y.chirality == Chirality::None);
  }

  bool consistent(int u, int v) const {
    for (int bi : a_.incident_bonds(u)) {
      const int n = a_.bond(bi).other(u);
      const int m = map_[static_cast<std::size_t>(n)];
      if (m < 0) continue;
      const int bj = b_.find_bond(v, m);
      if (bj < 0 || b_.bond(bj).order != a_.bond(bi).order) return false;
    }
    return true;
  }

  bool extend(std::size_t depth) {
    if (--budget_ <= 0) return false;
    if (depth == order_.size()) return stereo_ok();
    const int u = order_[depth];
    for (int v = 0; v < static_cast<int>(b_.atom_count()); ++v) {
      if (used_[static_cast<std::size_t>(v)] || !label_match(u, v) || !consistent(u, v)) continue;
      map_[static_cast<std::size_t>(u)] = v;
      used_[static_cast<std::size_t>(v)] = true;
      if (extend(depth + 1)) return true;
      map_[static_cast<std::size_t>(u)] = -1;
      used_[static_cast<std::size_t>(v)] = false;
    }
    return false;
  }

  bool stereo_ok() const {
    for (int u = 0; u < static_cast<int>(a_.atom_count()); ++u) {
      const auto ca = a_.atom(u).chirality;
      if (ca == Chirality::None) continue;
      const int v = map_[static_cast<std::size_t>(u)];
      std::vector<int> mapped;
      for (int r : a_.reference_neighbors(u)) mapped.push_back(r < 0 ? -1 : map_[static_cast<std::size_t>(r)]);
      const int parity = permutation_parity(mapped, b_.reference_neighbors(v));
      if (parity < 0) return false;
      const bool same = b_.atom(v).chirality == ca;
      if (same != (parity == 0)) return false;
    }
    for (int bi = 0; bi < static_cast<int>(a_.bond_count()); ++bi) {
      const auto& x = a_.bond(bi);
      const int bj = b_.find_bond(map_[static_cast<std::size_t>(x.begin)], map_[static_cast<std::size_t>(x.end)]);
      const auto& y = b_.bond(bj);
      if ((x.stereo == BondStereo::None) != (y.stereo == BondStereo::None)) return false;
      if (x.stereo == BondStereo::None) continue;
      int ref_begin = map_[static_cast<std::size_t>(x.stereo_begin)];
      int ref_end = map_[static_cast<std::size_t>(x.stereo_end)];
      if (y.begin != map_[static_cast<std::size_t>(x.begin)]) std::swap(ref_begin, ref_end);
      int flips = (ref_begin != y.stereo_begin) + (ref_end != y.stereo_end);
      const bool same = x.stereo == y.stereo;
      if (same != (flips % 2 == 0)) return false;
    }
    return true;
  }

  const MolecularGraph& a_;
  const MolecularGraph& b_;
  std::vector<int> map_;
  std::vector<bool> used_;
  std::vector<int> order_;
  long budget_ = 0;
};

inline bool isomorphic(const MolecularGraph& a, const MolecularGraph& b) { return Isomorphism(a, b).run(); }

}  // namespace oracle
