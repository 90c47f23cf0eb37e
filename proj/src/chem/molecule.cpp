// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "desmiles/chem.hpp"
#include "internal.hpp"

namespace desmiles::chem {

namespace {

constexpr std::array<std::string_view, 87> kSymbols = {
    "*",  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne",
    "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc",
    "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc",
    "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe",
    "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re", "Os",
    "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn"};

// Normal valences of the organic subset.
std::span<const int> normal_valences(int z) {
  static constexpr int kB[] = {3};
  static constexpr int kC[] = {4};
  static constexpr int kN[] = {3, 5};
  static constexpr int kO[] = {2};
  static constexpr int kP[] = {3, 5};
  static constexpr int kS[] = {2, 4, 6};
  static constexpr int kHalogen[] = {1};
  switch (z) {
    case 5: return kB;
    case 6: return kC;
    case 7: return kN;
    case 8: return kO;
    case 15: return kP;
    case 16: return kS;
    case 9:
    case 17:
    case 35:
    case 53: return kHalogen;
    default: return {};
  }
}

int bond_valence(BondOrder order) {
  switch (order) {
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    default: return 1;
  }
}

}  // namespace

std::string_view element_symbol(int atomic_number) {
  if (atomic_number <= 0 || atomic_number >= static_cast<int>(kSymbols.size())) return "*";
  return kSymbols[static_cast<std::size_t>(atomic_number)];
}

int atomic_number_of(std::string_view symbol) {
  for (std::size_t z = 1; z < kSymbols.size(); ++z)
    if (kSymbols[z] == symbol) return static_cast<int>(z);
  return 0;
}

int MolecularGraph::add_atom(const Atom& atom) {
  atoms_.push_back(atom);
  adjacency_.emplace_back();
  return static_cast<int>(atoms_.size()) - 1;
}

int MolecularGraph::add_bond(int a, int b, BondOrder order) {
  const int n = static_cast<int>(atoms_.size());
  if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("bond endpoint out of range");
  if (a == b) throw std::invalid_argument("self loop");
  if (find_bond(a, b) >= 0) throw std::invalid_argument("duplicate bond");
  Bond bond;
  bond.begin = a;
  bond.end = b;
  bond.order = order;
  bonds_.push_back(bond);
  const int index = static_cast<int>(bonds_.size()) - 1;
  adjacency_[static_cast<std::size_t>(a)].push_back(index);
  adjacency_[static_cast<std::size_t>(b)].push_back(index);
  return index;
}

int MolecularGraph::find_bond(int a, int b) const {
  for (int bi : adjacency_[static_cast<std::size_t>(a)])
    if (bonds_[static_cast<std::size_t>(bi)].other(a) == b) return bi;
  return -1;
}

std::vector<int> MolecularGraph::neighbors(int atom) const {
  std::vector<int> out;
  for (int bi : incident_bonds(atom)) out.push_back(bond(bi).other(atom));
  return out;
}

std::vector<int> MolecularGraph::reference_neighbors(int atom) const {
  std::vector<int> out = neighbors(atom);
  std::sort(out.begin(), out.end());
  if (detail::has_implicit_slot(*this, atom)) out.insert(out.begin(), -1);
  return out;
}

int MolecularGraph::heavy_atom_count() const {
  return static_cast<int>(std::count_if(atoms_.begin(), atoms_.end(),
                                        [](const Atom& a) { return a.atomic_number != 1; }));
}

int MolecularGraph::heavy_degree(int atom) const {
  int d = 0;
  for (int bi : incident_bonds(atom))
    if (this->atom(bond(bi).other(atom)).atomic_number != 1) ++d;
  return d;
}

int MolecularGraph::total_hydrogens(int atom) const {
  int h = this->atom(atom).hydrogens;
  for (int bi : incident_bonds(atom))
    if (this->atom(bond(bi).other(atom)).atomic_number == 1) ++h;
  return h;
}

std::pair<std::vector<int>, int> MolecularGraph::components() const {
  std::vector<int> label(atoms_.size(), -1);
  int count = 0;
  std::vector<int> stack;
  for (std::size_t start = 0; start < atoms_.size(); ++start) {
    if (label[start] >= 0) continue;
    label[start] = count;
    stack.push_back(static_cast<int>(start));
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int bi : incident_bonds(u)) {
        const int v = bond(bi).other(u);
        if (label[static_cast<std::size_t>(v)] < 0) {
          label[static_cast<std::size_t>(v)] = count;
          stack.push_back(v);
        }
      }
    }
    ++count;
  }
  return {std::move(label), count};
}

std::vector<bool> MolecularGraph::ring_bonds() const {
  // A bond is a ring bond iff it is not a bridge.
  const std::size_t n = atoms_.size();
  std::vector<int> order(n, -1), low(n, 0);
  std::vector<bool> ring(bonds_.size(), true);
  int counter = 0;
  std::function<void(int, int)> dfs = [&](int u, int parent_bond) {
    order[static_cast<std::size_t>(u)] = low[static_cast<std::size_t>(u)] = counter++;
    for (int bi : incident_bonds(u)) {
      if (bi == parent_bond) continue;
      const int v = bond(bi).other(u);
      if (order[static_cast<std::size_t>(v)] < 0) {
        dfs(v, bi);
        low[static_cast<std::size_t>(u)] =
            std::min(low[static_cast<std::size_t>(u)], low[static_cast<std::size_t>(v)]);
        if (low[static_cast<std::size_t>(v)] > order[static_cast<std::size_t>(u)])
          ring[static_cast<std::size_t>(bi)] = false;
      } else {
        low[static_cast<std::size_t>(u)] =
            std::min(low[static_cast<std::size_t>(u)], order[static_cast<std::size_t>(v)]);
      }
    }
  };
  for (std::size_t s = 0; s < n; ++s)
    if (order[s] < 0) dfs(static_cast<int>(s), -1);
  return ring;
}

std::vector<bool> MolecularGraph::ring_atoms() const {
  const auto ring = ring_bonds();
  std::vector<bool> out(atoms_.size(), false);
  for (std::size_t bi = 0; bi < bonds_.size(); ++bi) {
    if (!ring[bi]) continue;
    out[static_cast<std::size_t>(bonds_[bi].begin)] = true;
    out[static_cast<std::size_t>(bonds_[bi].end)] = true;
  }
  return out;
}

int MolecularGraph::ring_count() const {
  return static_cast<int>(bonds_.size()) - static_cast<int>(atoms_.size()) + fragment_count();
}

int default_hydrogens(const MolecularGraph& g, int atom) {
  const Atom& a = g.atom(atom);
  const auto valences = normal_valences(a.atomic_number);
  if (valences.empty()) return -1;
  int used = 0;
  for (int bi : g.incident_bonds(atom)) used += bond_valence(g.bond(bi).order);
  if (a.aromatic) {
    // One extra unit for the delocalised bond; aromatic atoms only take their
    // lowest valence.
    const int target = valences.front();
    const int with_pi = used + 1;
    return std::max(0, target - with_pi);
  }
  for (int v : valences)
    if (v >= used) return v - used;
  return 0;
}

std::vector<int> valence_warnings(const MolecularGraph& g) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(g.atom_count()); ++i) {
    const Atom& a = g.atom(i);
    const auto valences = normal_valences(a.atomic_number);
    if (valences.empty() || a.formal_charge != 0) continue;
    int used = a.hydrogens + (a.aromatic ? 1 : 0);
    for (int bi : g.incident_bonds(i)) used += bond_valence(g.bond(bi).order);
    if (used > valences.back()) out.push_back(i);
  }
  return out;
}

MolecularGraph subgraph(const MolecularGraph& g, std::span<const int> atoms) {
  std::vector<int> new_index(g.atom_count(), -1);
  MolecularGraph out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    new_index[static_cast<std::size_t>(atoms[i])] = static_cast<int>(i);
    out.add_atom(g.atom(atoms[i]));
  }
  for (const Bond& b : g.bonds()) {
    const int a = new_index[static_cast<std::size_t>(b.begin)];
    const int c = new_index[static_cast<std::size_t>(b.end)];
    if (a < 0 || c < 0) continue;
    const int nb = out.add_bond(a, c, b.order);
    Bond& copy = out.bond(nb);
    if (b.stereo != BondStereo::None) {
      const int sb = new_index[static_cast<std::size_t>(b.stereo_begin)];
      const int se = new_index[static_cast<std::size_t>(b.stereo_end)];
      if (sb >= 0 && se >= 0) {
        copy.stereo = b.stereo;
        copy.stereo_begin = sb;
        copy.stereo_end = se;
      }
    }
  }
  // Re-express tetrahedral parity in the new reference order.
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const int old_atom = atoms[i];
    Atom& a = out.atom(static_cast<int>(i));
    if (a.chirality == Chirality::None) continue;
    auto old_ref = g.reference_neighbors(old_atom);
    std::vector<int> mapped;
    bool complete = true;
    for (int nbr : old_ref) {
      if (nbr < 0) {
        mapped.push_back(-1);
        continue;
      }
      const int m = new_index[static_cast<std::size_t>(nbr)];
      if (m < 0) complete = false;
      mapped.push_back(m);
    }
    if (!complete) {
      a.chirality = Chirality::None;
      continue;
    }
    const auto new_ref = out.reference_neighbors(static_cast<int>(i));
    if (detail::odd_permutation(mapped, new_ref)) a.chirality = detail::flipped(a.chirality);
  }
  return out;
}

MolecularGraph largest_fragment(const MolecularGraph& g) {
  auto [label, count] = g.components();
  if (count <= 1) return g;
  std::vector<std::vector<int>> members(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < label.size(); ++i)
    members[static_cast<std::size_t>(label[i])].push_back(static_cast<int>(i));

  struct Candidate {
    int heavy;
    int total;
    std::string smiles;
    MolecularGraph graph;
  };
  std::optional<Candidate> best;
  for (const auto& m : members) {
    MolecularGraph frag = subgraph(g, m);
    Candidate c{frag.heavy_atom_count(), static_cast<int>(frag.atom_count()), {}, std::move(frag)};
    if (best) {
      if (c.heavy < best->heavy) continue;
      if (c.heavy == best->heavy && c.total < best->total) continue;
    }
    c.smiles = write_canonical_smiles(c.graph);
    if (best && c.heavy == best->heavy && c.total == best->total) {
      if (best->smiles.empty()) best->smiles = write_canonical_smiles(best->graph);
      if (!(c.smiles < best->smiles)) continue;
    }
    best = std::move(c);
  }
  return std::move(best->graph);
}

bool element_allowed(int z) {
  switch (z) {
    case 1: case 6: case 7: case 8: case 9: case 15: case 16: case 17: case 35: case 53:
      return true;
    default:
      return false;
  }
}

bool passes_drug_filter(const MolecularGraph& g) {
  if (g.heavy_atom_count() > kMaxHeavyAtoms) return false;
  return std::all_of(g.atoms().begin(), g.atoms().end(),
                     [](const Atom& a) { return element_allowed(a.atomic_number); });
}

std::optional<std::string> canonicalize(std::string_view smiles) {
  auto g = try_parse_smiles(smiles);
  if (!g) return std::nullopt;
  return write_canonical_smiles(*g);
}

std::vector<std::string> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

void write_corpus(const std::string& path, std::span<const std::string> smiles) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file " + path);
  for (const auto& s : smiles) out << s << '\n';
}

}  // namespace desmiles::chem
