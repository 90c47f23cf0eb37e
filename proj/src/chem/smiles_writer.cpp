// SPDX-License-Identifier: Apache-2.0
//
// SMILES writing. A rank vector fixes the traversal; the canonical form
// ranks atoms by neighbourhood refinement and resolves remaining ties by
// trying every member of the first tied class and keeping the smallest
// output string.

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <functional>
#include <numeric>
#include <tuple>

#include "desmiles/chem.hpp"
#include "internal.hpp"

namespace desmiles::chem {

namespace {

int order_code(BondOrder o) { return static_cast<int>(o); }

// Dense re-ranking by key, preserving key order.
template <typename Key>
std::vector<int> dense_ranks(const std::vector<Key>& keys) {
  std::vector<int> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
  });
  std::vector<int> out(keys.size(), 0);
  int rank = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i > 0 && keys[static_cast<std::size_t>(idx[i - 1])] < keys[static_cast<std::size_t>(idx[i])])
      ++rank;
    out[static_cast<std::size_t>(idx[i])] = rank;
  }
  return out;
}

int class_count(const std::vector<int>& classes) {
  return classes.empty() ? 0 : *std::max_element(classes.begin(), classes.end()) + 1;
}

std::vector<int> refine(const MolecularGraph& g, std::vector<int> classes) {
  using Key = std::pair<int, std::vector<std::pair<int, int>>>;
  int count = class_count(classes);
  for (;;) {
    std::vector<Key> keys(g.atom_count());
    for (int u = 0; u < static_cast<int>(g.atom_count()); ++u) {
      auto& key = keys[static_cast<std::size_t>(u)];
      key.first = classes[static_cast<std::size_t>(u)];
      for (int bi : g.incident_bonds(u)) {
        const Bond& b = g.bond(bi);
        key.second.emplace_back(order_code(b.order), classes[static_cast<std::size_t>(b.other(u))]);
      }
      std::sort(key.second.begin(), key.second.end());
    }
    auto next = dense_ranks(keys);
    const int next_count = class_count(next);
    classes = std::move(next);
    if (next_count == count) return classes;
    count = next_count;
  }
}

bool organic_subset(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 15: case 16: case 9: case 17: case 35: case 53:
      return true;
    default:
      return false;
  }
}

class Writer {
 public:
  Writer(const MolecularGraph& g, std::span<const int> ranks) : g_(g), ranks_(ranks) {}

  std::string run() {
    const std::size_t n = g_.atom_count();
    dfs_order_.assign(n, -1);
    parent_.assign(n, -1);
    parent_bond_.assign(n, -1);
    children_.assign(n, {});
    ring_bonds_.assign(n, {});
    bond_kind_.assign(g_.bond_count(), Kind::Unseen);
    direction_.assign(g_.bond_count(), 0);
    direction_from_.assign(g_.bond_count(), -1);
    emitted_.assign(n, false);

    std::vector<int> starts;
    {
      auto [label, count] = g_.components();
      std::vector<int> best(static_cast<std::size_t>(count), -1);
      for (int u = 0; u < static_cast<int>(n); ++u) {
        int& b = best[static_cast<std::size_t>(label[static_cast<std::size_t>(u)])];
        if (b < 0 || rank(u) < rank(b)) b = u;
      }
      starts = best;
      std::sort(starts.begin(), starts.end(), [&](int a, int b) { return rank(a) < rank(b); });
    }
    for (int s : starts) traverse(s, -1);
    assign_double_bond_directions();

    std::string out;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (i > 0) out.push_back('.');
      emit(starts[i], out);
    }
    return out;
  }

 private:
  enum class Kind : std::uint8_t { Unseen, Tree, Ring };

  int rank(int atom) const { return ranks_[static_cast<std::size_t>(atom)]; }

  void traverse(int u, int via_bond) {
    dfs_order_[static_cast<std::size_t>(u)] = counter_++;
    std::vector<int> bonds(g_.incident_bonds(u).begin(), g_.incident_bonds(u).end());
    std::sort(bonds.begin(), bonds.end(), [&](int a, int b) {
      return rank(g_.bond(a).other(u)) < rank(g_.bond(b).other(u));
    });
    for (int bi : bonds) {
      if (bi == via_bond || bond_kind_[static_cast<std::size_t>(bi)] != Kind::Unseen) continue;
      const int v = g_.bond(bi).other(u);
      if (dfs_order_[static_cast<std::size_t>(v)] >= 0) {
        // v is an ancestor: ring closure opened at v, closed at u.
        bond_kind_[static_cast<std::size_t>(bi)] = Kind::Ring;
        ring_bonds_[static_cast<std::size_t>(v)].push_back(bi);
        ring_bonds_[static_cast<std::size_t>(u)].push_back(bi);
        direction_from_[static_cast<std::size_t>(bi)] = v;
        continue;
      }
      bond_kind_[static_cast<std::size_t>(bi)] = Kind::Tree;
      direction_from_[static_cast<std::size_t>(bi)] = u;
      parent_[static_cast<std::size_t>(v)] = u;
      parent_bond_[static_cast<std::size_t>(v)] = bi;
      children_[static_cast<std::size_t>(u)].push_back(v);
      traverse(v, bi);
    }
  }

  // '/' and '\' marks reproducing each stereo double bond. Every single-bond
  // substituent of both ends is marked so readers may use any of them.
  void assign_double_bond_directions() {
    std::vector<int> doubles;
    for (int bi = 0; bi < static_cast<int>(g_.bond_count()); ++bi)
      if (g_.bond(bi).order == BondOrder::Double && g_.bond(bi).stereo != BondStereo::None)
        doubles.push_back(bi);
    const auto first_seen = [&](int bi) {
      const Bond& b = g_.bond(bi);
      return std::min(dfs_order_[static_cast<std::size_t>(b.begin)],
                      dfs_order_[static_cast<std::size_t>(b.end)]);
    };
    std::sort(doubles.begin(), doubles.end(),
              [&](int a, int b) { return first_seen(a) < first_seen(b); });

    for (int bi : doubles) {
      const Bond& d = g_.bond(bi);
      // (single bond, substituent, endpoint, orientation sign relative to the
      // reference substituent on that side)
      struct Mark {
        int bond;
        int sub;
        int end;
        int side;  // 0 = begin, 1 = end
        int relative;
      };
      std::vector<Mark> marks;
      bool usable = true;
      for (int side = 0; side < 2; ++side) {
        const int end = side == 0 ? d.begin : d.end;
        const int other = side == 0 ? d.end : d.begin;
        const int ref = side == 0 ? d.stereo_begin : d.stereo_end;
        int found = 0;
        for (int nb : g_.incident_bonds(end)) {
          const int sub = g_.bond(nb).other(end);
          if (sub == other) continue;
          if (g_.bond(nb).order != BondOrder::Single) continue;
          marks.push_back({nb, sub, end, side, sub == ref ? 1 : -1});
          ++found;
        }
        if (found == 0) usable = false;
      }
      if (!usable) continue;
      // Orientation s(sub -> begin) for begin-side marks and s(end -> sub)
      // for end-side marks; trans means the reference pair share a sign.
      const int trans = d.stereo == BondStereo::Trans ? 1 : -1;
      const auto wanted_symbol = [&](const Mark& m, int s_begin_ref) {
        int orientation;
        if (m.side == 0) {
          orientation = s_begin_ref * m.relative;  // s(sub -> begin)
          const int from = direction_from_[static_cast<std::size_t>(m.bond)];
          return from == m.sub ? orientation : -orientation;
        }
        orientation = s_begin_ref * trans * m.relative;  // s(end -> sub)
        const int from = direction_from_[static_cast<std::size_t>(m.bond)];
        return from == m.end ? orientation : -orientation;
      };
      // Without earlier constraints the first mark written out gets '/', so
      // the spelling does not depend on how the stereo was stored.
      const auto written_at = [&](const Mark& m) {
        const auto b = static_cast<std::size_t>(m.bond);
        if (bond_kind_[b] == Kind::Ring)
          return 2 * dfs_order_[static_cast<std::size_t>(direction_from_[b])] + 1;
        return 2 * std::max(dfs_order_[static_cast<std::size_t>(g_.bond(m.bond).begin)],
                            dfs_order_[static_cast<std::size_t>(g_.bond(m.bond).end)]);
      };
      const Mark* first = &marks.front();
      for (const Mark& m : marks)
        if (written_at(m) < written_at(*first)) first = &m;
      int s_ref = wanted_symbol(*first, 1) == 1 ? 1 : -1;
      for (const Mark& m : marks) {
        const int existing = direction_[static_cast<std::size_t>(m.bond)];
        if (existing != 0) {
          s_ref = wanted_symbol(m, 1) == existing ? 1 : -1;
          break;
        }
      }
      bool consistent = true;
      for (const Mark& m : marks) {
        const int existing = direction_[static_cast<std::size_t>(m.bond)];
        if (existing != 0 && existing != wanted_symbol(m, s_ref)) consistent = false;
      }
      if (!consistent) continue;
      for (const Mark& m : marks) direction_[static_cast<std::size_t>(m.bond)] = wanted_symbol(m, s_ref);
    }
  }

  std::string bond_symbol(int bi) const {
    const Bond& b = g_.bond(bi);
    const bool both_aromatic = g_.atom(b.begin).aromatic && g_.atom(b.end).aromatic;
    switch (b.order) {
      case BondOrder::Single: {
        const int dir = direction_[static_cast<std::size_t>(bi)];
        if (dir != 0) return dir > 0 ? "/" : "\\";
        return both_aromatic ? "-" : "";
      }
      case BondOrder::Double: return "=";
      case BondOrder::Triple: return "#";
      case BondOrder::Aromatic: return both_aromatic ? "" : ":";
    }
    return "";
  }

  void atom_text(int u, const std::vector<int>& written_neighbors, std::string& out) const {
    const Atom& a = g_.atom(u);
    Chirality chirality = a.chirality;
    if (chirality != Chirality::None &&
        detail::odd_permutation(written_neighbors, g_.reference_neighbors(u)))
      chirality = detail::flipped(chirality);

    std::string symbol(element_symbol(a.atomic_number));
    if (a.aromatic) symbol[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(symbol[0])));

    const bool plain = organic_subset(a.atomic_number) && a.formal_charge == 0 &&
                       chirality == Chirality::None && default_hydrogens(g_, u) == a.hydrogens &&
                       (!a.aromatic || symbol.size() == 1);
    if (plain) {
      out += symbol;
      return;
    }
    out.push_back('[');
    out += symbol;
    if (chirality == Chirality::CounterClockwise) out += "@";
    if (chirality == Chirality::Clockwise) out += "@@";
    if (a.hydrogens > 0) {
      out.push_back('H');
      if (a.hydrogens > 1) out += std::to_string(a.hydrogens);
    }
    if (a.formal_charge != 0) {
      out.push_back(a.formal_charge > 0 ? '+' : '-');
      const int m = std::abs(a.formal_charge);
      if (m > 1) out += std::to_string(m);
    }
    out.push_back(']');
  }

  static std::string digit_text(int d) {
    if (d < 10) return std::string(1, static_cast<char>('0' + d));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%%%02d", d);
    return buf;
  }

  int allocate_digit() {
    for (int d = 1; d < 100; ++d) {
      if (!digit_used_[static_cast<std::size_t>(d)]) {
        digit_used_[static_cast<std::size_t>(d)] = true;
        return d;
      }
    }
    throw std::runtime_error("more than 99 open ring closures");
  }

  void emit(int u, std::string& out) {
    emitted_[static_cast<std::size_t>(u)] = true;

    // Ring closures: those closing here first, then new openings, each in
    // traversal order of the partner atom.
    std::vector<int> closing, opening;
    for (int bi : ring_bonds_[static_cast<std::size_t>(u)]) {
      const int v = g_.bond(bi).other(u);
      (emitted_[static_cast<std::size_t>(v)] ? closing : opening).push_back(bi);
    }
    const auto by_partner = [&](int a, int b) {
      return dfs_order_[static_cast<std::size_t>(g_.bond(a).other(u))] <
             dfs_order_[static_cast<std::size_t>(g_.bond(b).other(u))];
    };
    std::sort(closing.begin(), closing.end(), by_partner);
    std::sort(opening.begin(), opening.end(), by_partner);

    std::vector<int> written;
    const int parent = parent_[static_cast<std::size_t>(u)];
    if (parent >= 0) written.push_back(parent);
    if (detail::has_implicit_slot(g_, u)) written.push_back(-1);
    for (int bi : closing) written.push_back(g_.bond(bi).other(u));
    for (int bi : opening) written.push_back(g_.bond(bi).other(u));
    for (int c : children_[static_cast<std::size_t>(u)]) written.push_back(c);

    atom_text(u, written, out);
    std::vector<int> freed;
    for (int bi : closing) {
      const int d = ring_digit_[bi];
      out += digit_text(d);
      freed.push_back(d);
    }
    for (int bi : opening) {
      const int d = allocate_digit();
      ring_digit_[bi] = d;
      out += bond_symbol(bi);
      out += digit_text(d);
    }
    for (int d : freed) digit_used_[static_cast<std::size_t>(d)] = false;

    const auto& kids = children_[static_cast<std::size_t>(u)];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const int v = kids[i];
      const bool branch = i + 1 < kids.size();
      if (branch) out.push_back('(');
      out += bond_symbol(parent_bond_[static_cast<std::size_t>(v)]);
      emit(v, out);
      if (branch) out.push_back(')');
    }
  }

  const MolecularGraph& g_;
  std::span<const int> ranks_;
  int counter_ = 0;
  std::vector<int> dfs_order_, parent_, parent_bond_;
  std::vector<std::vector<int>> children_, ring_bonds_;
  std::vector<Kind> bond_kind_;
  std::vector<int> direction_, direction_from_;
  std::vector<bool> emitted_;
  std::array<bool, 100> digit_used_{};
  std::map<int, int> ring_digit_;
};

constexpr int kMaxCanonicalLeaves = 2048;

void canonical_search(const MolecularGraph& g, const std::vector<int>& classes, int& leaves,
                      std::string& best) {
  const std::size_t n = classes.size();
  const int count = class_count(classes);
  if (count == static_cast<int>(n)) {
    ++leaves;
    std::string s = Writer(g, classes).run();
    if (best.empty() || s < best) best = std::move(s);
    return;
  }
  std::vector<int> size(static_cast<std::size_t>(count), 0);
  for (int c : classes) ++size[static_cast<std::size_t>(c)];
  int tied = 0;
  while (size[static_cast<std::size_t>(tied)] < 2) ++tied;
  for (int m = 0; m < static_cast<int>(n); ++m) {
    if (classes[static_cast<std::size_t>(m)] != tied) continue;
    std::vector<int> split(n);
    for (std::size_t a = 0; a < n; ++a)
      split[a] = 2 * classes[a] + (classes[a] == tied && static_cast<int>(a) != m ? 1 : 0);
    canonical_search(g, refine(g, dense_ranks(split)), leaves, best);
    if (leaves >= kMaxCanonicalLeaves) return;
  }
}

}  // namespace

std::vector<int> symmetry_classes(const MolecularGraph& g) {
  using Key = std::tuple<int, int, int, int, int>;
  std::vector<Key> keys(g.atom_count());
  for (int u = 0; u < static_cast<int>(g.atom_count()); ++u) {
    const Atom& a = g.atom(u);
    keys[static_cast<std::size_t>(u)] =
        Key{a.atomic_number, a.formal_charge, static_cast<int>(g.incident_bonds(u).size()),
            a.aromatic ? 1 : 0, a.hydrogens};
  }
  return refine(g, dense_ranks(keys));
}

int invariant_parity(const MolecularGraph& g, int atom, std::span<const int> classes) {
  const Atom& a = g.atom(atom);
  if (a.chirality == Chirality::None) return 0;
  const auto ref = g.reference_neighbors(atom);
  const auto key = [&](int nbr) { return nbr < 0 ? -1 : classes[static_cast<std::size_t>(nbr)]; };
  std::vector<int> sorted = ref;
  std::sort(sorted.begin(), sorted.end(), [&](int x, int y) { return key(x) < key(y); });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (key(sorted[i - 1]) == key(sorted[i])) return 0;
  Chirality c = a.chirality;
  if (detail::odd_permutation(ref, sorted)) c = detail::flipped(c);
  return c == Chirality::Clockwise ? 1 : 2;
}

std::string write_smiles(const MolecularGraph& g, std::span<const int> ranks) {
  if (ranks.size() != g.atom_count()) throw std::invalid_argument("rank vector size mismatch");
  return Writer(g, ranks).run();
}

std::string write_canonical_smiles(const MolecularGraph& g) {
  if (g.atom_count() == 0) return {};
  int leaves = 0;
  std::string best;
  canonical_search(g, symmetry_classes(g), leaves, best);
  return best;
}

std::string write_random_smiles(const MolecularGraph& g, std::mt19937_64& rng) {
  std::vector<int> ranks(g.atom_count());
  std::iota(ranks.begin(), ranks.end(), 0);
  std::shuffle(ranks.begin(), ranks.end(), rng);
  return Writer(g, ranks).run();
}

}  // namespace desmiles::chem
