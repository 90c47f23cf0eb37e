// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <set>

#include "desmiles/fingerprint.hpp"

namespace desmiles::fingerprint {

std::size_t BitFingerprint::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<int> BitFingerprint::on_bits() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < width_; ++i)
    if (test(i)) out.push_back(static_cast<int>(i));
  return out;
}

std::string BitFingerprint::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(width_ / 4, '0');
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned nibble = 0;
    for (std::size_t j = 0; j < 4; ++j) nibble = (nibble << 1) | (test(4 * i + j) ? 1U : 0U);
    out[i] = kDigits[nibble];
  }
  return out;
}

BitFingerprint BitFingerprint::from_hex(std::string_view hex) {
  BitFingerprint fp(hex.size() * 4);
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const char c = hex[i];
    unsigned nibble;
    if (c >= '0' && c <= '9') nibble = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') nibble = static_cast<unsigned>(c - 'a' + 10);
    else throw std::invalid_argument("invalid hex digit in fingerprint");
    for (std::size_t j = 0; j < 4; ++j)
      if (nibble & (8U >> j)) fp.set(4 * i + j);
  }
  return fp;
}

BitFingerprint BitFingerprint::concat(const BitFingerprint& tail) const {
  BitFingerprint out(width_ + tail.width_);
  for (std::size_t i = 0; i < width_; ++i)
    if (test(i)) out.set(i);
  for (std::size_t i = 0; i < tail.width_; ++i)
    if (tail.test(i)) out.set(width_ + i);
  return out;
}

std::uint32_t hash_combine(std::uint32_t h, std::uint32_t v) {
  std::uint32_t x = h ^ (v * 0x9E3779B1u + 0x7F4A7C15u + (h << 6) + (h >> 2));
  x ^= x >> 16;
  x *= 0x85EBCA6Bu;
  x ^= x >> 13;
  x *= 0xC2B2AE35u;
  x ^= x >> 16;
  return x;
}

std::vector<std::uint32_t> morgan_identifiers(const chem::MolecularGraph& g, int radius,
                                              bool use_chirality) {
  const int n = static_cast<int>(g.atom_count());
  std::vector<int> heavy;
  for (int u = 0; u < n; ++u)
    if (g.atom(u).atomic_number != 1) heavy.push_back(u);
  if (heavy.empty()) return {};

  const auto ring = g.ring_atoms();
  std::vector<int> classes;
  if (use_chirality) classes = chem::symmetry_classes(g);

  // Heavy-atom bonds, indexed densely for environment bitsets.
  std::vector<int> bond_slot(g.bond_count(), -1);
  int heavy_bonds = 0;
  for (int bi = 0; bi < static_cast<int>(g.bond_count()); ++bi) {
    const auto& b = g.bond(bi);
    if (g.atom(b.begin).atomic_number != 1 && g.atom(b.end).atomic_number != 1)
      bond_slot[static_cast<std::size_t>(bi)] = heavy_bonds++;
  }

  std::vector<std::uint32_t> ids(static_cast<std::size_t>(n), 0);
  std::vector<std::uint32_t> out;
  for (int u : heavy) {
    const auto& a = g.atom(u);
    std::uint32_t h = kHashSeed;
    h = hash_combine(h, a.atomic_number);
    h = hash_combine(h, static_cast<std::uint32_t>(g.heavy_degree(u)));
    h = hash_combine(h, static_cast<std::uint32_t>(g.total_hydrogens(u)));
    h = hash_combine(h, static_cast<std::uint32_t>(a.formal_charge + 128));
    h = hash_combine(h, ring[static_cast<std::size_t>(u)] ? 1u : 0u);
    h = hash_combine(h, a.aromatic ? 1u : 0u);
    if (use_chirality) h = hash_combine(h, static_cast<std::uint32_t>(chem::invariant_parity(g, u, classes)));
    ids[static_cast<std::size_t>(u)] = h;
    out.push_back(h);
  }

  using Env = std::vector<bool>;
  std::vector<Env> env(static_cast<std::size_t>(n), Env(static_cast<std::size_t>(heavy_bonds), false));
  std::set<Env> seen;
  for (int round = 1; round <= radius; ++round) {
    struct Candidate {
      Env env;
      std::uint32_t id;
      int atom;
    };
    std::vector<Candidate> candidates;
    std::vector<std::uint32_t> next = ids;
    std::vector<Env> next_env = env;
    for (int u : heavy) {
      std::vector<std::pair<std::uint32_t, std::uint32_t>> nbrs;
      Env e = env[static_cast<std::size_t>(u)];
      for (int bi : g.incident_bonds(u)) {
        const int slot = bond_slot[static_cast<std::size_t>(bi)];
        if (slot < 0) continue;
        const int v = g.bond(bi).other(u);
        nbrs.emplace_back(static_cast<std::uint32_t>(g.bond(bi).order) + 1, ids[static_cast<std::size_t>(v)]);
        e[static_cast<std::size_t>(slot)] = true;
        const Env& ev = env[static_cast<std::size_t>(v)];
        for (std::size_t k = 0; k < e.size(); ++k)
          if (ev[k]) e[k] = true;
      }
      std::sort(nbrs.begin(), nbrs.end());
      std::uint32_t h = hash_combine(kHashSeed, static_cast<std::uint32_t>(round));
      h = hash_combine(h, ids[static_cast<std::size_t>(u)]);
      for (const auto& [order, id] : nbrs) {
        h = hash_combine(h, order);
        h = hash_combine(h, id);
      }
      next[static_cast<std::size_t>(u)] = h;
      next_env[static_cast<std::size_t>(u)] = e;
      candidates.push_back({std::move(e), h, u});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
      if (x.env != y.env) return x.env < y.env;
      return x.id < y.id;
    });
    for (auto& c : candidates) {
      if (std::none_of(c.env.begin(), c.env.end(), [](bool b) { return b; })) continue;
      if (!seen.insert(c.env).second) continue;
      out.push_back(c.id);
    }
    ids = std::move(next);
    env = std::move(next_env);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

BitFingerprint morgan_fingerprint(const chem::MolecularGraph& g, int radius, std::size_t width,
                                  bool use_chirality) {
  if (width == 0 || (width & (width - 1)) != 0)
    throw std::invalid_argument("fingerprint width must be a power of two");
  if (radius < 0) throw std::invalid_argument("negative fingerprint radius");
  BitFingerprint fp(width);
  for (auto id : morgan_identifiers(g, radius, use_chirality)) fp.set(id % width);
  return fp;
}

BitFingerprint ecfp4(const chem::MolecularGraph& g) {
  return morgan_fingerprint(g, 2, kComponentBits, true);
}

BitFingerprint input_fingerprint(const chem::MolecularGraph& g) {
  return ecfp4(g).concat(morgan_fingerprint(g, 3, kComponentBits, true));
}

double tanimoto(const BitFingerprint& a, const BitFingerprint& b) {
  if (a.width() != b.width()) throw WidthMismatch(a.width(), b.width());
  std::size_t both = 0, either = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    either += static_cast<std::size_t>(std::popcount(wa[i] | wb[i]));
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace desmiles::fingerprint
