// SPDX-License-Identifier: Apache-2.0
//
// SMILES reader: chains, branches, ring closures (digits and %nn), bond
// symbols - = # : / \, organic-subset and bracket atoms with charge,
// hydrogen count and @/@@ chirality, and dot-separated fragments.

#include <cctype>
#include <map>
#include <optional>

#include "desmiles/chem.hpp"
#include "internal.hpp"

namespace desmiles::chem {

namespace {

struct OpenRing {
  int atom;
  char bond_symbol;  // 0 when none written
  std::size_t slot;  // placeholder position in the opener's neighbour order
  std::size_t position;
};

struct BondDirection {
  char symbol = 0;  // '/' or '\\'
  int from = -1;    // atom the symbol was written after
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  MolecularGraph run() {
    if (text_.empty()) fail("empty SMILES");
    while (pos_ < text_.size()) step();
    if (pending_bond_) fail("bond symbol without a following atom");
    if (!branches_.empty()) fail("unbalanced '('", branches_.back().position);
    if (!rings_.empty()) fail("unpaired ring closure", rings_.begin()->second.position);
    if (graph_.atom_count() == 0) fail("no atoms");
    finish_hydrogens();
    finish_chirality();
    finish_double_bond_stereo();
    return std::move(graph_);
  }

 private:
  struct Branch {
    int atom;
    std::size_t atoms_before;
    std::size_t position;
  };

  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, pos_); }
  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw SyntaxError(what, at);
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void step() {
    const char c = peek();
    switch (c) {
      case '-': case '=': case '#': case ':': case '/': case '\\':
        if (pending_bond_) fail("two consecutive bond symbols");
        if (prev_ < 0) fail("bond symbol without a preceding atom");
        pending_bond_ = c;
        ++pos_;
        return;
      case '(':
        if (prev_ < 0) fail("branch without a preceding atom");
        if (pending_bond_) fail("bond symbol before '('");
        branches_.push_back({prev_, graph_.atom_count(), pos_});
        ++pos_;
        return;
      case ')': {
        if (branches_.empty()) fail("unbalanced ')'");
        if (pending_bond_) fail("bond symbol before ')'");
        const Branch b = branches_.back();
        branches_.pop_back();
        if (graph_.atom_count() == b.atoms_before) fail("empty branch");
        prev_ = b.atom;
        ++pos_;
        return;
      }
      case '.':
        if (prev_ < 0) fail("'.' without a preceding atom");
        if (pending_bond_) fail("bond symbol before '.'");
        prev_ = -1;
        ++pos_;
        return;
      case '%':
        ring_closure();
        return;
      case ']':
        fail("unbalanced ']'");
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure();
      return;
    }
    if (c == '[') {
      bracket_atom();
      return;
    }
    organic_atom();
  }

  void organic_atom() {
    const std::size_t start = pos_;
    Atom atom;
    const char c = peek();
    const char n = peek(1);
    if (c == 'C' && n == 'l') {
      atom.atomic_number = 17;
      pos_ += 2;
    } else if (c == 'B' && n == 'r') {
      atom.atomic_number = 35;
      pos_ += 2;
    } else {
      switch (c) {
        case 'B': atom.atomic_number = 5; break;
        case 'C': atom.atomic_number = 6; break;
        case 'N': atom.atomic_number = 7; break;
        case 'O': atom.atomic_number = 8; break;
        case 'P': atom.atomic_number = 15; break;
        case 'S': atom.atomic_number = 16; break;
        case 'F': atom.atomic_number = 9; break;
        case 'I': atom.atomic_number = 53; break;
        case 'b': atom.atomic_number = 5; atom.aromatic = true; break;
        case 'c': atom.atomic_number = 6; atom.aromatic = true; break;
        case 'n': atom.atomic_number = 7; atom.aromatic = true; break;
        case 'o': atom.atomic_number = 8; atom.aromatic = true; break;
        case 'p': atom.atomic_number = 15; atom.aromatic = true; break;
        case 's': atom.atomic_number = 16; atom.aromatic = true; break;
        default: fail(std::string("unknown atom symbol '") + c + "'", start);
      }
      ++pos_;
    }
    add_atom(atom, 0);
  }

  void bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;  // '['
    if (std::isdigit(static_cast<unsigned char>(peek()))) fail("isotope labels are not supported");
    Atom atom;
    atom.bracket = true;
    const char c = peek();
    if (std::isupper(static_cast<unsigned char>(c))) {
      int z = 0;
      if (std::islower(static_cast<unsigned char>(peek(1)))) {
        z = atomic_number_of(text_.substr(pos_, 2));
        if (z != 0) pos_ += 2;
      }
      if (z == 0) {
        z = atomic_number_of(text_.substr(pos_, 1));
        if (z == 0) fail("unknown element in bracket atom");
        pos_ += 1;
      }
      atom.atomic_number = static_cast<std::uint8_t>(z);
    } else if (std::islower(static_cast<unsigned char>(c))) {
      static const std::pair<std::string_view, int> kAromatic[] = {
          {"se", 34}, {"as", 33}, {"te", 52}, {"b", 5}, {"c", 6},
          {"n", 7},   {"o", 8},   {"p", 15},  {"s", 16}};
      int z = 0;
      for (const auto& [sym, num] : kAromatic) {
        if (text_.substr(pos_, sym.size()) == sym) {
          z = num;
          pos_ += sym.size();
          break;
        }
      }
      if (z == 0) fail("unknown aromatic symbol in bracket atom");
      atom.atomic_number = static_cast<std::uint8_t>(z);
      atom.aromatic = true;
    } else {
      fail("missing element in bracket atom");
    }

    int chiral_marks = 0;
    if (peek() == '@') {
      ++pos_;
      chiral_marks = 1;
      if (peek() == '@') {
        ++pos_;
        chiral_marks = 2;
      }
      const char next = peek();
      if (next == 'T' || next == 'A' || next == 'S' || next == 'O')
        fail("extended stereo descriptors are not supported");
    }
    if (peek() == 'H') {
      ++pos_;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = peek() - '0';
        ++pos_;
      }
      atom.hydrogens = static_cast<std::uint8_t>(h);
    }
    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      ++pos_;
      int magnitude = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
          magnitude = magnitude * 10 + (peek() - '0');
          ++pos_;
        }
      } else {
        while (peek() == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      if (magnitude > 15) fail("formal charge out of range");
      atom.formal_charge = static_cast<std::int8_t>(sign == '+' ? magnitude : -magnitude);
    }
    if (peek() == ':') fail("atom classes are not supported");
    if (peek() != ']') fail("unbalanced '['", open);
    ++pos_;
    add_atom(atom, chiral_marks);
  }

  void add_atom(const Atom& atom, int chiral_marks) {
    const int index = graph_.add_atom(atom);
    order_.emplace_back();
    chiral_marks_.push_back(chiral_marks);
    implicit_slot_.push_back(prev_ >= 0 ? 1 : 0);
    if (prev_ >= 0) {
      connect(prev_, index, pending_bond_);
      order_[static_cast<std::size_t>(prev_)].push_back(index);
      order_[static_cast<std::size_t>(index)].push_back(prev_);
    }
    pending_bond_ = 0;
    prev_ = index;
  }

  int connect(int from, int to, char symbol) {
    BondOrder order;
    switch (symbol) {
      case '=': order = BondOrder::Double; break;
      case '#': order = BondOrder::Triple; break;
      case ':': order = BondOrder::Aromatic; break;
      case '-': case '/': case '\\': order = BondOrder::Single; break;
      default:
        order = graph_.atom(from).aromatic && graph_.atom(to).aromatic ? BondOrder::Aromatic
                                                                         : BondOrder::Single;
    }
    if (graph_.find_bond(from, to) >= 0) fail("duplicate bond");
    const int bi = graph_.add_bond(from, to, order);
    directions_.emplace_back();
    if (symbol == '/' || symbol == '\\') directions_[static_cast<std::size_t>(bi)] = {symbol, from};
    return bi;
  }

  void ring_closure() {
    const std::size_t start = pos_;
    if (prev_ < 0) fail("ring closure without a preceding atom");
    int number = 0;
    if (peek() == '%') {
      if (!std::isdigit(static_cast<unsigned char>(peek(1))) ||
          !std::isdigit(static_cast<unsigned char>(peek(2))))
        fail("'%' must be followed by two digits");
      number = (peek(1) - '0') * 10 + (peek(2) - '0');
      pos_ += 3;
    } else {
      number = peek() - '0';
      ++pos_;
    }
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      auto& order = order_[static_cast<std::size_t>(prev_)];
      rings_[number] = {prev_, pending_bond_, order.size(), start};
      order.push_back(-2);
      pending_bond_ = 0;
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    if (open.atom == prev_) fail("ring closure to the same atom", start);
    char symbol = pending_bond_;
    int from = prev_;
    if (open.bond_symbol != 0) {
      if (symbol != 0 && symbol != open.bond_symbol) {
        const bool both_directional = (symbol == '/' || symbol == '\\') &&
                                      (open.bond_symbol == '/' || open.bond_symbol == '\\');
        if (!both_directional) fail("conflicting ring closure bond symbols", start);
      }
      if (symbol == 0) {
        symbol = open.bond_symbol;
        from = open.atom;
      }
    }
    const int to = from == prev_ ? open.atom : prev_;
    connect(from, to, symbol);
    order_[static_cast<std::size_t>(open.atom)][open.slot] = prev_;
    order_[static_cast<std::size_t>(prev_)].push_back(open.atom);
    pending_bond_ = 0;
  }

  void finish_hydrogens() {
    for (int i = 0; i < static_cast<int>(graph_.atom_count()); ++i) {
      Atom& a = graph_.atom(i);
      if (a.bracket) continue;
      a.hydrogens = static_cast<std::uint8_t>(std::max(0, default_hydrogens(graph_, i)));
    }
  }

  void finish_chirality() {
    for (int i = 0; i < static_cast<int>(graph_.atom_count()); ++i) {
      const int marks = chiral_marks_[static_cast<std::size_t>(i)];
      if (marks == 0) continue;
      Atom& a = graph_.atom(i);
      std::vector<int> written = order_[static_cast<std::size_t>(i)];
      const std::size_t explicit_count = written.size();
      // Tetrahedral centres need four stereo slots; at most one may be an
      // implicit hydrogen or lone pair.
      if (explicit_count < 3 || explicit_count > 4 || a.hydrogens > 1 ||
          (explicit_count == 4 && a.hydrogens > 0)) {
        a.chirality = Chirality::None;
        continue;
      }
      if (explicit_count == 3) {
        written.insert(written.begin() + implicit_slot_[static_cast<std::size_t>(i)], -1);
      }
      Chirality c = marks == 1 ? Chirality::CounterClockwise : Chirality::Clockwise;
      if (detail::odd_permutation(written, graph_.reference_neighbors(i))) c = detail::flipped(c);
      a.chirality = c;
    }
  }

  void finish_double_bond_stereo() {
    for (int bi = 0; bi < static_cast<int>(graph_.bond_count()); ++bi) {
      Bond& bond = graph_.bond(bi);
      if (bond.order != BondOrder::Double) continue;
      const auto directional = [&](int atom, int exclude) -> std::pair<int, int> {
        for (int nb : graph_.incident_bonds(atom)) {
          if (nb == bi) continue;
          const auto& d = directions_[static_cast<std::size_t>(nb)];
          if (d.symbol == 0) continue;
          const int other = graph_.bond(nb).other(atom);
          if (other == exclude) continue;
          return {other, nb};
        }
        return {-1, -1};
      };
      const auto [x, xb] = directional(bond.begin, bond.end);
      const auto [y, yb] = directional(bond.end, bond.begin);
      if (x < 0 || y < 0) continue;
      // Orientation of x -> begin and end -> y; '/' is +1 when read forwards.
      const auto sign = [&](int bond_index, int tail) {
        const auto& d = directions_[static_cast<std::size_t>(bond_index)];
        const int s = d.symbol == '/' ? 1 : -1;
        return d.from == tail ? s : -s;
      };
      const int sa = sign(xb, x);
      const int sb = sign(yb, bond.end);
      bond.stereo = sa == sb ? BondStereo::Trans : BondStereo::Cis;
      bond.stereo_begin = x;
      bond.stereo_end = y;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  MolecularGraph graph_;
  int prev_ = -1;
  char pending_bond_ = 0;
  std::vector<Branch> branches_;
  std::map<int, OpenRing> rings_;
  std::vector<std::vector<int>> order_;
  std::vector<int> chiral_marks_;
  std::vector<int> implicit_slot_;
  std::vector<BondDirection> directions_;
};

}  // namespace

MolecularGraph parse_smiles(std::string_view text) { return Parser(text).run(); }

std::optional<MolecularGraph> try_parse_smiles(std::string_view text, std::string* error) {
  try {
    return Parser(text).run();
  } catch (const SyntaxError& e) {
    if (error) *error = e.what();
    return std::nullopt;
  }
}

}  // namespace desmiles::chem
