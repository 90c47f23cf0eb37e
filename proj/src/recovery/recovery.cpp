// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "desmiles/fingerprint.hpp"
#include "desmiles/recovery.hpp"

namespace desmiles::recovery {

namespace {

bool matches(const std::string& smiles, const fingerprint::BitFingerprint& target) {
  const auto g = chem::try_parse_smiles(smiles, nullptr);
  return g && fingerprint::input_fingerprint(*g) == target;
}

RecoveryResult from_list(const std::string& query, const fingerprint::BitFingerprint& fp,
                         const std::vector<search::Candidate>& list) {
  RecoveryResult r;
  r.query = query;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!matches(list[i].smiles, fp)) continue;
    r.found = true;
    r.rank = i + 1;
    r.matched_smiles = list[i].smiles;
    r.graph_exact = list[i].smiles == query;
    break;
  }
  r.leaves_emitted = list.size();
  return r;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

RecoveryResult recover_one(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                           const chem::MolecularGraph& g, const search::SearchBudget& budget) {
  RecoveryResult r;
  r.query = chem::write_canonical_smiles(g);
  const auto fp = fingerprint::input_fingerprint(g);
  const search::NetworkModel tm(model);
  search::MoleculeStream stream(tm, vocab, model.encode(fp), budget);
  std::size_t rank = 0;
  while (auto c = stream.next()) {
    ++rank;
    if (!matches(c->smiles, fp)) continue;
    r.found = true;
    r.rank = rank;
    r.matched_smiles = c->smiles;
    r.graph_exact = c->smiles == r.query;
    break;
  }
  r.branches_used = stream.enumerator().branches();
  r.leaves_emitted = stream.enumerator().leaves();
  return r;
}

RecoveryResult recover_with(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                            const chem::MolecularGraph& g, const DecoderChoice& decoder,
                            const search::SearchBudget& budget) {
  if (decoder.kind == Decoder::AStar) return recover_one(model, vocab, g, budget);
  const auto fp = fingerprint::input_fingerprint(g);
  const search::NetworkModel tm(model);
  const auto root = model.encode(fp);
  const auto list = decoder.kind == Decoder::Beam
                        ? search::beam_search(tm, vocab, root, decoder.width, budget.max_payload_tokens)
                        : search::random_sample(tm, vocab, root, decoder.tries, decoder.seed,
                                                budget.max_payload_tokens);
  return from_list(chem::write_canonical_smiles(g), fp, list);
}

RecoveryMetrics summarize(std::span<const RecoveryResult> results) {
  RecoveryMetrics m;
  std::vector<double> branches;
  for (const auto& r : results) {
    ++m.count;
    if (!r.found) continue;
    ++m.found;
    if (r.graph_exact) ++m.graph_exact;
    ++m.rank_histogram[*r.rank];
    branches.push_back(static_cast<double>(r.branches_used));
  }
  if (m.count > 0) {
    m.rate = static_cast<double>(m.found) / static_cast<double>(m.count);
    m.graph_exact_rate = static_cast<double>(m.graph_exact) / static_cast<double>(m.count);
  }
  m.branches_p50 = percentile(branches, 0.5);
  m.branches_p75 = percentile(branches, 0.75);
  m.branches_p90 = percentile(branches, 0.9);
  return m;
}

RecoveryMetrics evaluate_recovery(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                                  std::span<const std::string> dataset, const search::SearchBudget& budget,
                                  const DecoderChoice& decoder, std::ostream* jsonl) {
  std::vector<RecoveryResult> results;
  results.reserve(dataset.size());
  for (const auto& s : dataset) {
    results.push_back(recover_with(model, vocab, chem::parse_smiles(s), decoder, budget));
    if (jsonl) *jsonl << to_json_line(results.back()) << '\n';
  }
  return summarize(results);
}

std::string to_json_line(const RecoveryResult& r) {
  nlohmann::ordered_json j;
  j["query"] = r.query;
  j["found"] = r.found;
  j["rank"] = r.rank ? nlohmann::json(*r.rank) : nlohmann::json(nullptr);
  j["branches_used"] = r.branches_used;
  j["leaves_emitted"] = r.leaves_emitted;
  j["matched_smiles"] = r.matched_smiles ? nlohmann::json(*r.matched_smiles) : nlohmann::json(nullptr);
  j["graph_exact"] = r.graph_exact;
  return j.dump();
}

std::string RecoveryMetrics::summary_json() const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["found"] = found;
  j["rate"] = rate ? nlohmann::json(*rate) : nlohmann::json(nullptr);
  j["graph_exact_rate"] = graph_exact_rate ? nlohmann::json(*graph_exact_rate) : nlohmann::json(nullptr);
  j["branches_p50"] = branches_p50;
  j["branches_p75"] = branches_p75;
  j["branches_p90"] = branches_p90;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [rank, n] : rank_histogram) hist[std::to_string(rank)] = n;
  j["rank_histogram"] = hist;
  return j.dump(1);
}

}  // namespace desmiles::recovery
