// SPDX-License-Identifier: Apache-2.0
//
// Molecular graphs, SMILES parsing, canonical SMILES writing and the
// drug-likeness filters applied to training corpora.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace desmiles::chem {

/// Raised for strings that are not well-formed SMILES. Callers that filter
/// generated streams should use try_parse_smiles() instead of catching this.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at offset " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Tetrahedral parity. Stored relative to the atom's reference neighbour
/// order (see MolecularGraph::reference_neighbors): looking from the first
/// reference neighbour, the rest run clockwise (@@) or counterclockwise (@).
enum class Chirality : std::uint8_t { None, Clockwise, CounterClockwise };

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

/// Cis/trans configuration of a double bond, relative to the bond's two
/// reference substituents.
enum class BondStereo : std::uint8_t { None, Cis, Trans };

struct Atom {
  std::uint8_t atomic_number = 6;
  std::int8_t formal_charge = 0;
  bool aromatic = false;
  Chirality chirality = Chirality::None;
  /// Hydrogens attached but not present as graph nodes.
  std::uint8_t hydrogens = 0;
  /// Set for atoms parsed in bracket form (only used to validate chirality).
  bool bracket = false;
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;
  BondStereo stereo = BondStereo::None;
  /// For stereo double bonds: a neighbour of `begin` and a neighbour of `end`
  /// that the cis/trans flag refers to.
  int stereo_begin = -1;
  int stereo_end = -1;

  int other(int atom) const { return atom == begin ? end : begin; }
};

/// Atoms and bonds of one (possibly multi-fragment) molecule. Immutable once
/// built by the parser or a GraphBuilder-like sequence of add_* calls.
class MolecularGraph {
 public:
  int add_atom(const Atom& atom);
  /// Returns the bond index. Throws std::invalid_argument on self loops and
  /// duplicate bonds.
  int add_bond(int a, int b, BondOrder order);

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  const Atom& atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  Atom& atom(int i) { return atoms_[static_cast<std::size_t>(i)]; }
  const Bond& bond(int i) const { return bonds_[static_cast<std::size_t>(i)]; }
  Bond& bond(int i) { return bonds_[static_cast<std::size_t>(i)]; }
  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }

  /// Bond indices incident to `atom`, in insertion order.
  std::span<const int> incident_bonds(int atom) const {
    return adjacency_[static_cast<std::size_t>(atom)];
  }
  /// Bond between a and b, or -1.
  int find_bond(int a, int b) const;
  std::vector<int> neighbors(int atom) const;

  /// Neighbour order that Atom::chirality refers to: -1 (the implicit
  /// hydrogen or lone pair slot) first when present, then neighbour atom
  /// indices ascending.
  std::vector<int> reference_neighbors(int atom) const;

  int heavy_atom_count() const;
  /// Heavy neighbours of an atom.
  int heavy_degree(int atom) const;
  /// Implicit hydrogens plus explicit hydrogen nodes bonded to the atom.
  int total_hydrogens(int atom) const;

  /// Connected-component label per atom and the number of components.
  std::pair<std::vector<int>, int> components() const;
  int fragment_count() const { return components().second; }

  /// Per-bond flag: the bond lies on a cycle.
  std::vector<bool> ring_bonds() const;
  /// Per-atom flag: the atom has at least one ring bond.
  std::vector<bool> ring_atoms() const;
  /// Cyclomatic number: bonds - atoms + components.
  int ring_count() const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<int>> adjacency_;
};

/// Element symbol for an atomic number ("*" for unknown).
std::string_view element_symbol(int atomic_number);
/// Atomic number for a symbol, 0 when unknown. Case sensitive.
int atomic_number_of(std::string_view symbol);

/// Implicit hydrogen count an unbracketed atom would receive given its
/// current bonds. Returns -1 when the element is outside the organic subset.
int default_hydrogens(const MolecularGraph& g, int atom);

/// Atoms whose bonding exceeds every normal valence of their element.
/// Informational only; parsing does not reject these.
std::vector<int> valence_warnings(const MolecularGraph& g);

MolecularGraph parse_smiles(std::string_view text);
/// Non-throwing variant for stream filtering.
std::optional<MolecularGraph> try_parse_smiles(std::string_view text,
                                               std::string* error = nullptr);

/// Symmetry classes from iterative neighbourhood refinement over element,
/// charge, degree, aromaticity and hydrogen count. Equal classes mean the
/// refinement could not distinguish the atoms. Values are dense, 0-based
/// and ordered by invariant.
std::vector<int> symmetry_classes(const MolecularGraph& g);

/// Chirality descriptor independent of atom numbering: 0 when the atom is
/// not a stereocentre under `classes` (no parity, or two neighbours in the
/// same class), otherwise 1 or 2 depending on handedness relative to the
/// class ordering of the neighbours.
int invariant_parity(const MolecularGraph& g, int atom,
                     std::span<const int> classes);

/// SMILES following a depth-first traversal driven by `ranks` (lower rank
/// visited first). Different rank vectors give different spellings of the
/// same molecule.
std::string write_smiles(const MolecularGraph& g, std::span<const int> ranks);

std::string write_canonical_smiles(const MolecularGraph& g);

/// A valid non-canonical spelling starting from a random atom with random
/// branch order.
std::string write_random_smiles(const MolecularGraph& g, std::mt19937_64& rng);

/// Induced subgraph on `atoms` (kept in the given order).
MolecularGraph subgraph(const MolecularGraph& g, std::span<const int> atoms);

/// The fragment with the most heavy atoms; ties go to more total atoms, then
/// to the lexicographically smaller canonical SMILES.
MolecularGraph largest_fragment(const MolecularGraph& g);

inline constexpr int kMaxHeavyAtoms = 70;
bool element_allowed(int atomic_number);
/// heavy_atom_count <= 70 and all elements in {H, C, N, O, F, P, S, Cl, Br, I}.
bool passes_drug_filter(const MolecularGraph& g);

/// Canonical SMILES of a string, or nullopt when it does not parse.
std::optional<std::string> canonicalize(std::string_view smiles);

/// Corpus file: one SMILES per line, '#' comment lines and blank lines
/// skipped, trailing whitespace stripped.
std::vector<std::string> read_corpus(const std::string& path);
void write_corpus(const std::string& path, std::span<const std::string> smiles);

}  // namespace desmiles::chem
