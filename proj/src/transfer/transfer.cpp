// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "desmiles/corpus.hpp"
#include "desmiles/transfer.hpp"

namespace desmiles::transfer {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

bool better(const PropertyScorer& scorer, double a, double b) { return scorer.gain(b, a) > 0; }

}  // namespace

bool PropertyScorer::meets_threshold(double s) const {
  const auto t = success_threshold();
  if (!t) return true;
  return direction() == Direction::HigherIsBetter ? s >= *t : s <= *t;
}

double RingCountScorer::score(const chem::MolecularGraph& g) const { return g.ring_count(); }

double HalogenScorer::score(const chem::MolecularGraph& g) const {
  for (const auto& a : g.atoms()) {
    if (a.atomic_number == 9 || a.atomic_number == 17 || a.atomic_number == 35 || a.atomic_number == 53) return 1.0;
  }
  return 0.0;
}

double HashScorer::score(const chem::MolecularGraph& g) const {
  const auto bits = fingerprint::ecfp4(g).on_bits();
  if (bits.empty()) return 0.0;
  double sum = 0;
  for (const int b : bits) {
    const auto h = splitmix(seed_ * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(b));
    sum += static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
  }
  return sum / std::sqrt(static_cast<double>(bits.size()));
}

std::unique_ptr<PropertyScorer> make_scorer(const std::string& name, std::uint64_t seed) {
  if (name == "rings") return std::make_unique<RingCountScorer>();
  if (name == "halogen") return std::make_unique<HalogenScorer>();
  if (name == "hash") return std::make_unique<HashScorer>(seed);
  throw std::invalid_argument("unknown scorer: " + name);
}

std::vector<MatchedPair> build_matched_pairs(std::span<const std::string> corpus, const PropertyScorer& scorer,
                                             const PairOptions& options) {
  if (corpus.empty()) throw EmptyResult("empty corpus");
  if (!(options.top_fraction > 0 && options.top_fraction <= 1)) throw std::invalid_argument("top_fraction");

  std::vector<chem::MolecularGraph> graphs;
  std::vector<std::string> canonical;
  graphs.reserve(corpus.size());
  for (const auto& s : corpus) {
    graphs.push_back(chem::parse_smiles(s));
    canonical.push_back(chem::write_canonical_smiles(graphs.back()));
  }
  std::vector<fingerprint::BitFingerprint> fps;
  std::vector<double> scores;
  fps.reserve(graphs.size());
  scores.reserve(graphs.size());
  for (const auto& g : graphs) {
    fps.push_back(fingerprint::ecfp4(g));
    scores.push_back(scorer.score(g));
  }

  std::vector<std::size_t> sample(corpus.size());
  std::iota(sample.begin(), sample.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(sample.begin(), sample.end(), rng);
  sample.resize(std::min(sample.size(), options.sample_size));

  std::stable_sort(sample.begin(), sample.end(),
                   [&](std::size_t a, std::size_t b) { return better(scorer, scores[a], scores[b]); });
  const auto n_parents = static_cast<std::size_t>(
      std::ceil(options.top_fraction * static_cast<double>(sample.size()) - 1e-9));
  sample.resize(std::max<std::size_t>(1, n_parents));

  std::vector<MatchedPair> pairs;
  std::vector<std::pair<double, std::size_t>> neighbours;
  for (const auto p : sample) {
    neighbours.clear();
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (canonical[j] == canonical[p]) continue;
      const double sim = fingerprint::tanimoto(fps[p], fps[j]);
      if (sim >= options.sim_threshold) neighbours.emplace_back(sim, j);
    }
    std::sort(neighbours.begin(), neighbours.end(),
              [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    if (neighbours.size() > options.neighbor_cap) neighbours.resize(options.neighbor_cap);
    for (const auto& [sim, j] : neighbours) {
      if (scorer.gain(scores[j], scores[p]) < options.gap_threshold) continue;
      pairs.push_back({canonical[j], canonical[p], scores[j], scores[p], sim});
    }
  }
  if (pairs.empty()) throw EmptyResult("no matched pairs satisfy the similarity and gap thresholds");
  return pairs;
}

void write_pairs(const std::string& path, std::span<const MatchedPair> pairs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "#source\ttarget\tsource_score\ttarget_score\tsimilarity\n";
  out.precision(17);
  for (const auto& p : pairs) {
    out << p.source_smiles << '\t' << p.target_smiles << '\t' << p.source_score << '\t' << p.target_score << '\t'
        << p.similarity << '\n';
  }
}

std::vector<MatchedPair> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<MatchedPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    MatchedPair p;
    std::string a, b, c;
    if (!std::getline(fields, p.source_smiles, '\t') || !std::getline(fields, p.target_smiles, '\t') ||
        !std::getline(fields, a, '\t') || !std::getline(fields, b, '\t') || !std::getline(fields, c, '\t')) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
    }
    p.source_score = std::stod(a);
    p.target_score = std::stod(b);
    p.similarity = std::stod(c);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void FinetuneConfig::validate() const {
  if (epochs < 5 || epochs > 12) throw std::invalid_argument("fine-tuning epochs must be in [5, 12]");
  const bool lr_ok = std::abs(max_lr - 0.002) < 1e-12 || std::abs(max_lr - 0.001) < 1e-12 ||
                     std::abs(max_lr - 0.0005) < 1e-12;
  if (!lr_ok) throw std::invalid_argument("fine-tuning max_lr must be 0.002, 0.001 or 0.0005");
  if (dividing_factor < 5 || dividing_factor > 10) throw std::invalid_argument("dividing factor must be in [5, 10]");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
}

train::TrainConfig FinetuneConfig::to_train_config() const {
  train::TrainConfig c;
  c.epochs = epochs;
  c.max_lr = max_lr;
  c.dividing_factor = dividing_factor;
  c.batch_size = batch_size;
  c.rng_seed = rng_seed;
  c.freeze_first_encoder_layer = freeze_first_encoder_layer;
  return c;
}

std::vector<train::EpochMetrics> finetune(net::Network<float>& model, std::span<const MatchedPair> pairs,
                                          const tokenizer::Vocabulary& vocab, const FinetuneConfig& config,
                                          const train::Callbacks& callbacks) {
  config.validate();
  std::vector<train::TrainingPair> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) {
    const std::string target[] = {p.target_smiles};
    if (corpus::filter_by_token_length(vocab, target).empty()) continue;
    data.push_back({fingerprint::input_fingerprint(chem::parse_smiles(p.source_smiles)), p.target_smiles});
  }
  if (data.empty()) throw EmptyResult("no pair target fits the token cap");
  return train::train(model, data, vocab, config.to_train_config(), callbacks);
}

double BenchmarkResult::failure_rate_at(std::size_t limit) const {
  if (inputs.empty()) return 0.0;
  std::size_t failed = 0;
  for (const auto& r : inputs) {
    if (!r.first_success || *r.first_success > limit) ++failed;
  }
  return static_cast<double>(failed) / static_cast<double>(inputs.size());
}

std::string BenchmarkResult::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["inputs"] = inputs.size();
  j["success_rate"] = success_rate;
  j["failure_rate"] = failure_rate();
  j["diversity"] = diversity;
  nlohmann::ordered_json curve = nlohmann::ordered_json::object();
  for (std::size_t n = 1; n <= k; ++n) curve[std::to_string(n)] = failure_rate_at(n);
  j["failure_rate_at"] = curve;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& r : inputs) {
    nlohmann::ordered_json e;
    e["input"] = r.input;
    e["input_score"] = r.input_score;
    e["first_success"] = r.first_success ? nlohmann::json(*r.first_success) : nlohmann::json(nullptr);
    e["diversity"] = r.diversity ? nlohmann::json(*r.diversity) : nlohmann::json(nullptr);
    nlohmann::ordered_json gen = nlohmann::ordered_json::array();
    for (const auto& g : r.generated) {
      gen.push_back({{"smiles", g.smiles},
                     {"log_prob", g.log_prob},
                     {"score", g.score},
                     {"similarity", g.similarity},
                     {"qualifies", g.qualifies}});
    }
    e["generated"] = gen;
    per.push_back(e);
  }
  j["per_input"] = per;
  return j.dump(1);
}

BenchmarkResult evaluate_streams(std::span<const std::string> inputs,
                                 std::span<const std::vector<search::Candidate>> streams,
                                 const PropertyScorer& scorer, double sim_threshold, std::size_t k) {
  if (inputs.size() != streams.size()) throw std::invalid_argument("one stream per input expected");
  BenchmarkResult result;
  result.k = k;
  std::size_t successes = 0;
  double diversity_sum = 0;
  std::size_t diversity_n = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    InputReport rep;
    const auto in_graph = chem::parse_smiles(inputs[i]);
    rep.input = chem::write_canonical_smiles(in_graph);
    rep.input_score = scorer.score(in_graph);
    const auto in_fp = fingerprint::ecfp4(in_graph);
    std::vector<fingerprint::BitFingerprint> good;
    const auto n = std::min(k, streams[i].size());
    for (std::size_t r = 0; r < n; ++r) {
      const auto& c = streams[i][r];
      const auto g = chem::parse_smiles(c.smiles);
      const auto fp = fingerprint::ecfp4(g);
      Generated out{c.smiles, c.log_prob, scorer.score(g), fingerprint::tanimoto(in_fp, fp), false};
      out.qualifies = c.smiles != rep.input && out.similarity >= sim_threshold &&
                      scorer.gain(rep.input_score, out.score) > 0 && scorer.meets_threshold(out.score);
      if (out.qualifies) {
        good.push_back(fp);
        if (!rep.first_success) rep.first_success = r + 1;
      }
      rep.generated.push_back(std::move(out));
    }
    if (rep.first_success) ++successes;
    if (!good.empty()) {
      double d = 0;
      std::size_t m = 0;
      for (std::size_t a = 0; a < good.size(); ++a) {
        for (std::size_t b = a + 1; b < good.size(); ++b, ++m) d += 1.0 - fingerprint::tanimoto(good[a], good[b]);
      }
      if (m > 0) rep.diversity = d / static_cast<double>(m);
      diversity_sum += m > 0 ? d / static_cast<double>(m) : 0.0;
      ++diversity_n;
    }
    result.inputs.push_back(std::move(rep));
  }
  if (!inputs.empty()) result.success_rate = static_cast<double>(successes) / static_cast<double>(inputs.size());
  if (diversity_n > 0) result.diversity = diversity_sum / static_cast<double>(diversity_n);
  return result;
}

std::vector<std::vector<search::Candidate>> generate_streams(const net::Network<float>& model,
                                                             const tokenizer::Vocabulary& vocab,
                                                             std::span<const std::string> inputs, std::size_t k,
                                                             const search::SearchBudget& budget) {
  const search::NetworkModel tm(model);
  std::vector<std::vector<search::Candidate>> out;
  out.reserve(inputs.size());
  for (const auto& s : inputs) {
    const auto fp = fingerprint::input_fingerprint(chem::parse_smiles(s));
    out.push_back(search::astar_stream(tm, vocab, model.encode(fp), budget, k));
  }
  return out;
}

BenchmarkResult evaluate_improvement(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                                     std::span<const std::string> inputs, const PropertyScorer& scorer,
                                     double sim_threshold, std::size_t k, const search::SearchBudget& budget) {
  const auto streams = generate_streams(model, vocab, inputs, k, budget);
  return evaluate_streams(inputs, streams, scorer, sim_threshold, k);
}

}  // namespace desmiles::transfer
