// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>

#include "desmiles/corpus.hpp"
#include "desmiles/fingerprint.hpp"

using namespace desmiles;
using fingerprint::BitFingerprint;

namespace {

BitFingerprint bits(std::size_t width, std::initializer_list<int> on) {
  BitFingerprint fp(width);
  for (int b : on) fp.set(static_cast<std::size_t>(b));
  return fp;
}

}  // namespace

TEST_CASE("tanimoto on hand-built vectors") {
  const auto a = bits(64, {1, 2});
  const auto b = bits(64, {2, 3});
  CHECK(fingerprint::tanimoto(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(fingerprint::tanimoto(a, a) == 1.0);
  CHECK(fingerprint::tanimoto(bits(64, {1}), bits(64, {5})) == 0.0);
  CHECK(fingerprint::tanimoto(BitFingerprint(64), BitFingerprint(64)) == 1.0);
  CHECK_THROWS_AS(fingerprint::tanimoto(BitFingerprint(64), BitFingerprint(128)), fingerprint::WidthMismatch);
}

TEST_CASE("hex serialisation round trips") {
  const auto fp = bits(16, {0, 5, 15});
  CHECK(fp.to_hex() == "8401");
  CHECK(BitFingerprint::from_hex(fp.to_hex()) == fp);
  const auto g = chem::parse_smiles("CC(=O)Nc1ccc(O)cc1");
  const auto in = fingerprint::input_fingerprint(g);
  CHECK(in.to_hex().size() == 1024);
  CHECK(BitFingerprint::from_hex(in.to_hex()) == in);
}

TEST_CASE("path-graph identifiers match hand enumeration") {
  // CCCC: two atom types at radius 0; four distinct one-bond neighbourhoods
  // at radius 1 of which two identifiers are new; at radius 2 only the
  // whole-chain environment is a new substructure.
  const auto g = chem::parse_smiles("CCCC");
  const auto r0 = fingerprint::morgan_identifiers(g, 0, true);
  const auto r1 = fingerprint::morgan_identifiers(g, 1, true);
  const auto r2 = fingerprint::morgan_identifiers(g, 2, true);
  CHECK(r0.size() == 2);
  CHECK(r1.size() == 4);
  CHECK(r2.size() == 5);
  CHECK(std::includes(r1.begin(), r1.end(), r0.begin(), r0.end()));
  CHECK(std::includes(r2.begin(), r2.end(), r1.begin(), r1.end()));
}

TEST_CASE("radius-0 bits differ between methane and ethane") {
  const auto c = fingerprint::morgan_fingerprint(chem::parse_smiles("C"), 0, 2048, true);
  const auto cc = fingerprint::morgan_fingerprint(chem::parse_smiles("CC"), 0, 2048, true);
  CHECK(c != cc);
  CHECK(c.popcount() == 1);
  CHECK(cc.popcount() == 1);
}

TEST_CASE("input fingerprint layout") {
  const auto g = chem::parse_smiles("O=C(O)c1ccccc1Cl");
  const auto in = fingerprint::input_fingerprint(g);
  CHECK(in.width() == 4096);
  const auto e4 = fingerprint::morgan_fingerprint(g, 2, 2048, true);
  const auto e6 = fingerprint::morgan_fingerprint(g, 3, 2048, true);
  CHECK(in == e4.concat(e6));
  CHECK(fingerprint::ecfp4(g) == e4);
  CHECK(in.popcount() >= 1);
}

TEST_CASE("enantiomers have different fingerprints, respellings do not") {
  const auto r = fingerprint::input_fingerprint(chem::parse_smiles("C[C@H](N)O"));
  const auto s = fingerprint::input_fingerprint(chem::parse_smiles("C[C@@H](N)O"));
  CHECK(r != s);
  CHECK(r == fingerprint::input_fingerprint(chem::parse_smiles("N[C@@H](C)O")));
  CHECK(fingerprint::input_fingerprint(chem::parse_smiles("C[C@H](N)O")) ==
        fingerprint::input_fingerprint(chem::parse_smiles("C[C@H](N)O")));
  const auto nonchiral_r = fingerprint::morgan_fingerprint(chem::parse_smiles("C[C@H](N)O"), 2, 2048, false);
  const auto nonchiral_s = fingerprint::morgan_fingerprint(chem::parse_smiles("C[C@@H](N)O"), 2, 2048, false);
  CHECK(nonchiral_r == nonchiral_s);
}

TEST_CASE("fixed hash gives fixed identifiers") {
  CHECK(fingerprint::hash_combine(0, 0) == fingerprint::hash_combine(0, 0));
  CHECK(fingerprint::hash_combine(1, 2) != fingerprint::hash_combine(2, 1));
  const auto ids = fingerprint::morgan_identifiers(chem::parse_smiles("CCO"), 1, true);
  CHECK(ids == fingerprint::morgan_identifiers(chem::parse_smiles("OCC"), 1, true));
}

TEST_CASE("tanimoto is symmetric, bounded and its distance obeys the triangle inequality") {
  corpus::SyntheticOptions o;
  o.count = 300;
  o.seed = 4;
  const auto mols = corpus::synthetic_corpus(o);
  std::vector<BitFingerprint> fps;
  for (const auto& s : mols) fps.push_back(fingerprint::ecfp4(chem::parse_smiles(s)));
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, fps.size() - 1);
  for (int t = 0; t < 10000; ++t) {
    const auto& a = fps[pick(rng)];
    const auto& b = fps[pick(rng)];
    const auto& c = fps[pick(rng)];
    const double ab = fingerprint::tanimoto(a, b);
    REQUIRE(ab == fingerprint::tanimoto(b, a));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0);
    const double dab = 1 - ab, dbc = 1 - fingerprint::tanimoto(b, c), dac = 1 - fingerprint::tanimoto(a, c);
    REQUIRE(dac <= dab + dbc + 1e-12);
  }
}
