// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <string>

#include "desmiles/chem.hpp"
#include "desmiles/corpus.hpp"
#include "graph_oracle.hpp"

using namespace desmiles;

namespace {

const std::vector<std::string>& corpus_1000() {
  static const auto mols = [] {
    corpus::SyntheticOptions o;
    o.count = 1000;
    o.seed = 11;
    return corpus::synthetic_corpus(o);
  }();
  return mols;
}

}  // namespace

TEST_CASE("parser builds the expected graphs") {
  const auto methane = chem::parse_smiles("C");
  CHECK(methane.atom_count() == 1);
  CHECK(methane.bond_count() == 0);
  CHECK(methane.total_hydrogens(0) == 4);

  const auto benzene = chem::parse_smiles("c1ccccc1");
  CHECK(benzene.atom_count() == 6);
  CHECK(benzene.bond_count() == 6);
  CHECK(benzene.ring_count() == 1);
  for (const auto& a : benzene.atoms()) CHECK(a.aromatic);

  const auto big_ring = chem::parse_smiles("C%10CCCCC%10");
  CHECK(big_ring.ring_count() == 1);

  const auto salt = chem::parse_smiles("CCO.[Na+].[Cl-]");
  CHECK(salt.fragment_count() == 3);
  CHECK(salt.heavy_atom_count() == 5);

  const auto charged = chem::parse_smiles("[NH4+]");
  CHECK(charged.atom(0).formal_charge == 1);
  CHECK(charged.total_hydrogens(0) == 4);

  // Written order C, H, N, O; reference order H, C, N, O is one swap away,
  // so @ becomes clockwise.
  const auto chiral = chem::parse_smiles("C[C@H](N)O");
  CHECK(chiral.atom(1).chirality == chem::Chirality::Clockwise);
  CHECK(chem::parse_smiles("[C@H](C)(N)O").atom(0).chirality == chem::Chirality::CounterClockwise);
}

TEST_CASE("malformed SMILES raise SyntaxError and try_parse returns nothing") {
  for (const char* bad : {"C(C", "CC)", "C1CC", "[CH3", "C[Xx]", "Q", "C[C@TB1](F)(Cl)Br", "C==C", ""}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(chem::parse_smiles(bad), chem::SyntaxError);
    std::string err;
    CHECK_FALSE(chem::try_parse_smiles(bad, &err).has_value());
    CHECK_FALSE(err.empty());
  }
}

TEST_CASE("valence problems are warnings, not parse errors") {
  const auto g = chem::parse_smiles("C(C)(C)(C)(C)C");
  CHECK(chem::valence_warnings(g).size() == 1);
}

TEST_CASE("canonical SMILES is independent of input order") {
  CHECK(chem::write_canonical_smiles(chem::parse_smiles("OCC")) ==
        chem::write_canonical_smiles(chem::parse_smiles("CCO")));
  CHECK(chem::write_canonical_smiles(chem::parse_smiles("C")) == "C");
  CHECK(chem::canonicalize("c1ccccc1O") == chem::canonicalize("Oc1ccccc1"));
  CHECK_FALSE(chem::canonicalize("C(").has_value());
}

TEST_CASE("canonical SMILES keeps stereochemistry") {
  const auto r = *chem::canonicalize("C[C@H](N)O");
  const auto s = *chem::canonicalize("C[C@@H](N)O");
  CHECK(r != s);
  CHECK(*chem::canonicalize("N[C@@H](C)O") == r);
  CHECK(*chem::canonicalize("F/C=C/F") != *chem::canonicalize("F/C=C\\F"));
  CHECK(*chem::canonicalize("F\\C=C\\F") == *chem::canonicalize("F/C=C/F"));
}

TEST_CASE("canonical round trip is isomorphic to the input over 1000 molecules") {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (const auto& s : corpus_1000()) {
    CAPTURE(s);
    const auto g = chem::parse_smiles(s);
    const auto canon = chem::write_canonical_smiles(g);
    const auto back = chem::parse_smiles(canon);
    REQUIRE(oracle::isomorphic(g, back));
    CHECK(chem::write_canonical_smiles(back) == canon);
    const auto respelled = chem::write_random_smiles(g, rng);
    const auto g2 = chem::parse_smiles(respelled);
    CHECK(oracle::isomorphic(g, g2));
    CHECK(chem::write_canonical_smiles(g2) == canon);
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("isomorphism oracle distinguishes enantiomers and bond orders") {
  CHECK_FALSE(oracle::isomorphic(chem::parse_smiles("C[C@H](N)O"), chem::parse_smiles("C[C@@H](N)O")));
  CHECK(oracle::isomorphic(chem::parse_smiles("C[C@H](N)O"), chem::parse_smiles("N[C@@H](C)O")));
  CHECK_FALSE(oracle::isomorphic(chem::parse_smiles("C=CC"), chem::parse_smiles("CCC")));
}

TEST_CASE("largest fragment") {
  CHECK(chem::write_canonical_smiles(chem::largest_fragment(chem::parse_smiles("CCO.Cl"))) == "CCO");
  CHECK(chem::write_canonical_smiles(chem::largest_fragment(chem::parse_smiles("CC.OO"))) == "CC");
  const auto single = chem::parse_smiles("c1ccccc1CN");
  CHECK(chem::write_canonical_smiles(chem::largest_fragment(single)) == chem::write_canonical_smiles(single));
  for (const auto& s : {"CCO.Cl", "CCCC.CC.C", "c1ccccc1.O"}) {
    const auto g = chem::parse_smiles(s);
    CHECK(chem::largest_fragment(g).heavy_atom_count() <= g.heavy_atom_count());
  }
}

TEST_CASE("drug filter") {
  CHECK_FALSE(chem::passes_drug_filter(chem::parse_smiles(std::string(71, 'C'))));
  CHECK(chem::passes_drug_filter(chem::parse_smiles(std::string(70, 'C'))));
  CHECK(chem::passes_drug_filter(chem::parse_smiles("CCO")));
  CHECK_FALSE(chem::passes_drug_filter(chem::parse_smiles("C[Si](C)C")));
  CHECK(chem::passes_drug_filter(chem::parse_smiles("FC(Cl)(Br)I")));
}

TEST_CASE("filter pipeline strips salts, rejects and deduplicates") {
  const std::vector<std::string> raw = {"CCO.Cl", "OCC", "C[Si](C)C", "C(C", "c1ccccc1"};
  corpus::FilterStats stats;
  const auto kept = corpus::filter_corpus(raw, &stats);
  CHECK(kept == std::vector<std::string>{"CCO", *chem::canonicalize("c1ccccc1")});
  CHECK(stats.input == 5);
  CHECK(stats.unparsable == 1);
  CHECK(stats.rejected_filter == 1);
  CHECK(stats.duplicates == 1);
  CHECK(stats.kept == 2);
}

TEST_CASE("synthetic corpus is drug-like, canonical and deterministic") {
  const auto& mols = corpus_1000();
  REQUIRE(mols.size() == 1000);
  std::size_t halogen = 0;
  for (const auto& s : mols) {
    const auto g = chem::parse_smiles(s);
    CHECK(chem::passes_drug_filter(g));
    CHECK(chem::write_canonical_smiles(g) == s);
    if (s.find_first_of("FIB") != std::string::npos || s.find("Cl") != std::string::npos) ++halogen;
  }
  CHECK(halogen > 100);
  CHECK(halogen < 900);
  corpus::SyntheticOptions o;
  o.count = 1000;
  o.seed = 11;
  CHECK(corpus::synthetic_corpus(o) == mols);
}
