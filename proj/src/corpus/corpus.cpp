// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <unordered_set>

#include "desmiles/chem.hpp"
#include "desmiles/corpus.hpp"

namespace desmiles::corpus {

std::vector<std::string> filter_corpus(std::span<const std::string> raw, FilterStats* stats) {
  FilterStats s;
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& text : raw) {
    ++s.input;
    auto g = chem::try_parse_smiles(text, nullptr);
    if (!g || g->atom_count() == 0) {
      ++s.unparsable;
      continue;
    }
    const auto frag = chem::largest_fragment(*g);
    if (!chem::passes_drug_filter(frag)) {
      ++s.rejected_filter;
      continue;
    }
    auto canon = chem::write_canonical_smiles(frag);
    if (!seen.insert(canon).second) {
      ++s.duplicates;
      continue;
    }
    out.push_back(std::move(canon));
  }
  s.kept = out.size();
  if (stats) *stats = s;
  return out;
}

namespace {

bool fits(const tokenizer::Vocabulary& vocab, const std::string& smiles, bool reversed) {
  try {
    tokenizer::encode(vocab, smiles, reversed);
    return true;
  } catch (const tokenizer::UnknownCharacter&) {
    return false;
  } catch (const tokenizer::TooLong&) {
    return false;
  }
}

}  // namespace

std::vector<std::string> filter_by_token_length(const tokenizer::Vocabulary& vocab,
                                                std::span<const std::string> smiles,
                                                std::size_t* dropped) {
  std::vector<std::string> out;
  for (const auto& s : smiles)
    if (fits(vocab, s, false) && fits(vocab, s, true)) out.push_back(s);
  if (dropped) *dropped = smiles.size() - out.size();
  return out;
}

double payload_coverage(const tokenizer::Vocabulary& vocab, std::span<const std::string> smiles) {
  if (smiles.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : smiles)
    if (fits(vocab, s, false)) ++ok;
  return static_cast<double>(ok) / static_cast<double>(smiles.size());
}

// Template language for the synthetic generator: 'X' and 'Y' (cores) or
// 'Z' (substituents) become fresh ring-closure digits, "{}" is an optional
// substituent slot after the preceding atom, "{N}" is an aromatic NH that
// may carry a substituent instead of its hydrogen.

namespace {

// Every core starts with an atom that can take a linker bond in slot 0.
const char* const kCores[] = {
    "cX{}c{}c{}c{}c{}cX{}",            // benzene
    "cX{}c{}c{}c{}c{}cX{}",
    "cX{}c{}c{}nc{}cX{}",              // pyridine
    "cX{}c{}nc{}ncX{}",                // pyrimidine
    "cX{}c{}c{}scX{}",                 // thiophene
    "cX{}c{}c{}ocX{}",                 // furan
    "cX{}c{}c{}{N}cX{}",               // pyrrole
    "cX{}nc{}{N}cX{}",                 // imidazole
    "cX{}c{}n{N}cX{}",                 // pyrazole
    "cX{}nc{}scX{}",                   // thiazole
    "cX{}c{}c{}cYc{}c{}c{}c{}cYcX{}",  // naphthalene
    "cX{}c{}c{}cY{N}c{}c{}cYcX{}",     // indole
    "cX{}c{}c{}cYnc{}c{}c{}cYcX{}",    // quinoline
    "cX{}c{}c{}cY{N}c{}ncYcX{}",       // benzimidazole
    "cX{}c{}c{}cYoc{}c{}cYcX{}",       // benzofuran
    "CX{}C{}C{}C{}C{}CX{}",            // cyclohexane
    "CX{}C{}C{}N{}C{}CX{}",            // piperidine
    "NX{}CCN{}CCX",                    // piperazine
    "NX{}CCOCCX",                      // morpholine
    "NX{}C{}C{}C{}CX",                 // pyrrolidine
    "CX{}C{}OC{}CX{}",                 // tetrahydrofuran
    "CX{}C{}CX{}",                     // cyclopropane
    "CX{}C{}C{}C{}CX{}",               // cyclopentane
};

const char* const kLinkers[] = {
    "",  "", "C", "CC", "O", "N", "NC(=O)", "C(=O)N", "S(=O)(=O)N", "C(=O)", "OC", "CO", "CN",
    "NC(=O)N", "C(=O)NC", "NS(=O)(=O)", "/C=C/", "/C=C\\", "OCC", "NC",
};

const char* const kSubstituents[] = {
    "C", "C", "CC", "C(C)C", "CCC", "OC", "OC", "O", "N", "NC", "N(C)C", "F", "F", "F", "Cl", "Cl",
    "Cl", "Br", "Br", "I", "C(F)(F)F", "C(F)(F)F", "OC(F)(F)F", "C#N", "C(=O)O", "C(=O)N",
    "C(=O)NC", "C(=O)OC", "S(C)(=O)=O", "S(N)(=O)=O", "[N+](=O)[O-]", "C(C)=O", "NC(C)=O", "CO",
    "CN", "OCC", "CZCCZ", "NZCCCCZ", "NZCCOCCZ", "[C@@H](C)N", "[C@H](C)O", "[C@@H](C)C(=O)O",
    "[C@H](N)C", "[C@@H]ZCCCNZ", "[C@H](O)CO", "OCCN(C)C", "SC", "C(C)(C)C",
};

int count_slots(std::string_view t) {
  int n = 0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    if (t[i] == '{') ++n;
  return n;
}

// Slots hanging off a nitrogen only take carbon-attached groups.
std::vector<bool> nitrogen_slots(std::string_view t) {
  std::vector<bool> out;
  char last = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == '{') {
      out.push_back(t[i + 1] == 'N' || last == 'N');
      i += t[i + 1] == 'N' ? 2 : 1;
    } else if (t[i] != 'X' && t[i] != 'Y') {
      last = t[i];
    }
  }
  return out;
}

bool carbon_attached(std::string_view sub) {
  return (sub[0] == 'C' && sub.substr(0, 2) != "Cl") || sub.substr(0, 2) == "[C";
}

class Assembler {
 public:
  std::string ring_digit() {
    const int d = next_digit_++;
    return d < 10 ? std::string(1, static_cast<char>('0' + d)) : "%" + std::to_string(d);
  }

  std::string substituent(std::string_view t) {
    std::string out;
    std::string z;
    for (char c : t) {
      if (c == 'Z') {
        if (z.empty()) z = ring_digit();
        out += z;
      } else {
        out += c;
      }
    }
    return out;
  }

  // `fills[i]` is the branch body for slot i, empty for hydrogen.
  std::string core(std::string_view t, const std::vector<std::string>& fills) {
    std::string out, x, y;
    std::size_t slot = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const char c = t[i];
      if (c == 'X' || c == 'Y') {
        std::string& d = c == 'X' ? x : y;
        if (d.empty()) d = ring_digit();
        out += d;
      } else if (c == '{') {
        const bool nh = t[i + 1] == 'N';
        const std::string& fill = fills[slot++];
        if (nh) out += fill.empty() ? "[nH]" : "n(" + fill + ")";
        else if (!fill.empty()) out += "(" + fill + ")";
        i += nh ? 2 : 1;
      } else {
        out += c;
      }
    }
    return out;
  }

 private:
  int next_digit_ = 1;
};

struct Scaffold {
  int core1;
  int core2 = -1;  // -1 when the molecule has a single core
  int link_slot = 0;
  int linker = 0;
};

}  // namespace

std::vector<std::string> synthetic_corpus(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  const auto pick = [&](std::size_t n) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  };
  constexpr std::size_t kCoreCount = std::size(kCores);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  const std::size_t max_attempts = options.count * 20 + 1000;
  std::size_t attempts = 0;
  const int variants = std::max(1, options.variants_per_series);

  while (out.size() < options.count && attempts < max_attempts) {
    Scaffold sc;
    sc.core1 = static_cast<int>(pick(kCoreCount));
    const int slots1 = count_slots(kCores[sc.core1]);
    if (std::bernoulli_distribution(0.65)(rng)) {
      sc.core2 = static_cast<int>(pick(kCoreCount));
      sc.link_slot = static_cast<int>(pick(static_cast<std::size_t>(slots1)));
      sc.linker = static_cast<int>(pick(std::size(kLinkers)));
    }
    const int slots2 = sc.core2 >= 0 ? count_slots(kCores[sc.core2]) : 0;
    const auto n1 = nitrogen_slots(kCores[sc.core1]);
    const auto n2 = sc.core2 >= 0 ? nitrogen_slots(kCores[sc.core2]) : std::vector<bool>{};

    for (int v = 0; v < variants && out.size() < options.count; ++v, ++attempts) {
      // Free slots: core1 minus the link slot, core2 minus its first atom's slot.
      std::vector<std::pair<int, int>> free;
      for (int s = 0; s < slots1; ++s)
        if (sc.core2 < 0 || s != sc.link_slot) free.emplace_back(1, s);
      for (int s = 1; s < slots2; ++s) free.emplace_back(2, s);
      std::shuffle(free.begin(), free.end(), rng);
      const int k = std::min<int>(static_cast<int>(free.size()),
                                  std::discrete_distribution<int>({2, 4, 4, 2})(rng));

      std::vector<std::string> fill1(static_cast<std::size_t>(slots1));
      std::vector<std::string> fill2(static_cast<std::size_t>(slots2));
      Assembler as;
      // Digits are allocated while the string is emitted, so substituent
      // bodies are expanded into placeholders first and filled in order.
      std::vector<std::pair<std::pair<int, int>, int>> chosen;
      for (int i = 0; i < k; ++i) {
        const auto where = free[static_cast<std::size_t>(i)];
        const auto& on_n = where.first == 1 ? n1 : n2;
        int sub;
        do {
          sub = static_cast<int>(pick(std::size(kSubstituents)));
        } while (on_n[static_cast<std::size_t>(where.second)] && !carbon_attached(kSubstituents[sub]));
        chosen.emplace_back(where, sub);
      }
      for (const auto& [where, sub] : chosen) {
        auto& fills = where.first == 1 ? fill1 : fill2;
        fills[static_cast<std::size_t>(where.second)] = as.substituent(kSubstituents[sub]);
      }
      if (sc.core2 >= 0) {
        const std::string second = as.core(kCores[sc.core2], fill2);
        fill1[static_cast<std::size_t>(sc.link_slot)] = std::string(kLinkers[sc.linker]) + second;
      }
      const std::string smiles = as.core(kCores[sc.core1], fill1);

      auto g = chem::try_parse_smiles(smiles, nullptr);
      if (!g || !chem::passes_drug_filter(*g) || g->heavy_atom_count() < 6) continue;
      auto canon = chem::write_canonical_smiles(*g);
      if (seen.insert(canon).second) out.push_back(std::move(canon));
    }
  }
  return out;
}

}  // namespace desmiles::corpus
