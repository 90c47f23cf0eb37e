// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit status: 0 success, 1 usage error, 2 data
// error (unreadable or malformed input, empty results).

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "desmiles/config.hpp"
#include "desmiles/corpus.hpp"
#include "desmiles/landscape.hpp"
#include "desmiles/recovery.hpp"
#include "desmiles/search.hpp"
#include "desmiles/train.hpp"
#include "desmiles/transfer.hpp"

using namespace desmiles;

namespace {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> overrides;
};

config::RunConfig resolve(const Globals& g) {
  auto c = g.config_path.empty() ? config::RunConfig{} : config::load_config(g.config_path);
  for (const auto& o : g.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected section.key=value, got " + o);
    config::set_value(c, o.substr(0, eq), o.substr(eq + 1));
  }
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  c.propagate_seed();
  std::cerr << "# resolved configuration (seed " << c.seed << ")\n" << c.to_text() << "\n";
  return c;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

net::Network<float> load_model(const std::string& path, const tokenizer::Vocabulary& vocab) {
  auto model = net::load_checkpoint(path, vocab.content_hash());
  if (model.config().vocab_size != static_cast<int>(vocab.size())) {
    throw DataError("checkpoint vocabulary size does not match " + std::to_string(vocab.size()));
  }
  return model;
}

fingerprint::BitFingerprint query_fingerprint(const std::string& smiles, const std::string& hex) {
  if (!hex.empty()) return fingerprint::BitFingerprint::from_hex(hex);
  const auto g = chem::try_parse_smiles(smiles);
  if (!g) throw DataError("cannot parse SMILES " + smiles);
  return fingerprint::input_fingerprint(*g);
}

std::vector<search::Candidate> decode(const net::Network<float>& model, const tokenizer::Vocabulary& vocab,
                                      const fingerprint::BitFingerprint& fp, const std::string& decoder,
                                      std::size_t top, std::size_t width, std::size_t tries,
                                      const config::RunConfig& c) {
  const search::NetworkModel tm(model);
  const auto root = model.encode(fp);
  std::vector<search::Candidate> out;
  if (decoder == "astar") {
    out = search::astar_stream(tm, vocab, root, c.search, top);
  } else if (decoder == "beam") {
    out = search::beam_search(tm, vocab, root, width, c.search.max_payload_tokens);
  } else {
    out = search::random_sample(tm, vocab, root, tries, c.seed, c.search.max_payload_tokens);
  }
  if (out.size() > top) out.resize(top);
  return out;
}

void print_stream(std::ostream& out, const std::vector<search::Candidate>& list) {
  out.precision(8);
  for (std::size_t i = 0; i < list.size(); ++i) {
    out << i + 1 << '\t' << list[i].smiles << '\t' << list[i].log_prob << '\n';
  }
}

train::Callbacks epoch_logger() {
  train::Callbacks cb;
  cb.log = &std::cerr;
  return cb;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fingerprint-to-molecule generation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Configuration file (key = value with [sections])");
  app.add_option("--seed", g.seed, "Seed for every random component");
  app.add_option("--workers", g.workers, "Worker threads for landscape grids");
  app.add_option("--set", g.overrides, "Override a configuration key, e.g. train.max_lr=0.002");

  std::string in, out, vocab_path, checkpoint, smiles, hex, decoder = "astar", scorer_name = "halogen";
  std::vector<std::string> checkpoints, anchors;
  std::size_t count = 10000, top = 20, width = 10, tries = 100, limit = 0, k = 20;
  double sim = 0.4;

  auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic drug-like corpus");
  synth->add_option("--out", out)->required();
  synth->add_option("--count", count);

  auto* filter = app.add_subcommand("filter", "Parse, filter and canonicalise a raw SMILES file");
  filter->add_option("--in", in)->required();
  filter->add_option("--out", out)->required();

  auto* build_vocab = app.add_subcommand("build-vocab", "Train a BPE vocabulary (size from model.vocab_size)");
  build_vocab->add_option("--corpus", in)->required();
  build_vocab->add_option("--out", out)->required();

  auto* pretrain = app.add_subcommand("pretrain", "Train fingerprint -> molecule on a corpus");
  pretrain->add_option("--corpus", in)->required();
  pretrain->add_option("--vocab", vocab_path)->required();
  pretrain->add_option("--out", out)->required();
  pretrain->add_option("--init", checkpoint, "Continue from this checkpoint");

  auto* generate = app.add_subcommand("generate", "Ranked molecules for one fingerprint (TSV)");
  generate->add_option("--checkpoint", checkpoint)->required();
  generate->add_option("--vocab", vocab_path)->required();
  auto* gen_smiles = generate->add_option("--smiles", smiles);
  generate->add_option("--fingerprint", hex, "4096-bit input fingerprint in hex")->excludes(gen_smiles);
  generate->add_option("--top", top);
  generate->add_option("--decoder", decoder)->check(CLI::IsMember({"astar", "beam", "sample"}));
  generate->add_option("--width", width);
  generate->add_option("--tries", tries);

  auto* recover = app.add_subcommand("recover", "Recovery rate over a SMILES file");
  recover->add_option("--checkpoint", checkpoint)->required();
  recover->add_option("--vocab", vocab_path)->required();
  recover->add_option("--corpus", in)->required();
  recover->add_option("--out", out, "Per-molecule JSON lines");
  recover->add_option("--limit", limit, "Use only the first N molecules");
  recover->add_option("--decoder", decoder)->check(CLI::IsMember({"astar", "beam", "sample"}));
  recover->add_option("--width", width);
  recover->add_option("--tries", tries);

  auto* pairs = app.add_subcommand("pairs", "Build matched pairs for a property");
  pairs->add_option("--corpus", in)->required();
  pairs->add_option("--out", out)->required();
  pairs->add_option("--scorer", scorer_name)->check(CLI::IsMember({"rings", "halogen", "hash"}));

  auto* finetune = app.add_subcommand("finetune", "Fine-tune a checkpoint on matched pairs");
  finetune->add_option("--checkpoint", checkpoint)->required();
  finetune->add_option("--vocab", vocab_path)->required();
  finetune->add_option("--pairs", in)->required();
  finetune->add_option("--out", out)->required();

  auto* benchmark = app.add_subcommand("benchmark", "Success, diversity and failure-vs-k on inputs");
  benchmark->add_option("--checkpoint", checkpoints, "One checkpoint, or several to merge their streams")
      ->required();
  benchmark->add_option("--vocab", vocab_path)->required();
  benchmark->add_option("--inputs", in)->required();
  benchmark->add_option("--scorer", scorer_name)->check(CLI::IsMember({"rings", "halogen", "hash"}));
  benchmark->add_option("--k", k);
  benchmark->add_option("--similarity", sim);
  benchmark->add_option("--out", out, "JSON report");

  auto* land = app.add_subcommand("landscape", "Probability grid over the plane of three molecules (CSV)");
  land->add_option("--checkpoint", checkpoint)->required();
  land->add_option("--vocab", vocab_path)->required();
  land->add_option("--anchors", anchors)->required()->expected(3);
  land->add_option("--out", out)->required();

  auto* correlate = app.add_subcommand("correlate", "Fingerprint vs embedding distance correlation (JSON)");
  correlate->add_option("--checkpoint", checkpoint)->required();
  correlate->add_option("--corpus", in)->required();
  correlate->add_option("--out", out)->required();
  correlate->add_option("--limit", limit, "Use only the first N molecules");

  auto* ensemble = app.add_subcommand("ensemble-generate", "Merged ranked stream of several checkpoints");
  ensemble->add_option("--checkpoint", checkpoints)->required();
  ensemble->add_option("--vocab", vocab_path)->required();
  ensemble->add_option("--smiles", smiles)->required();
  ensemble->add_option("--top", top);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto c = resolve(g);

    if (synth->parsed()) {
      corpus::SyntheticOptions o;
      o.count = count;
      o.seed = c.seed;
      const auto mols = corpus::synthetic_corpus(o);
      chem::write_corpus(out, mols);
      std::cerr << "wrote " << mols.size() << " molecules\n";
    } else if (filter->parsed()) {
      corpus::FilterStats stats;
      const auto kept = corpus::filter_corpus(read_lines(in), &stats);
      chem::write_corpus(out, kept);
      std::cerr << "input " << stats.input << " unparsable " << stats.unparsable << " rejected "
                << stats.rejected_filter << " duplicates " << stats.duplicates << " kept " << stats.kept << "\n";
    } else if (build_vocab->parsed()) {
      const auto mols = read_lines(in);
      const auto v = tokenizer::train_bpe_both_directions(mols, static_cast<std::size_t>(c.model.vocab_size));
      v.save(out);
      std::cerr << "vocabulary " << v.size() << " tokens, payload coverage "
                << corpus::payload_coverage(v, mols) << "\n";
    } else if (pretrain->parsed()) {
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      std::size_t dropped = 0;
      const auto raw = read_lines(in);
      const auto mols = corpus::filter_by_token_length(vocab, raw, &dropped);
      if (mols.empty()) throw DataError("no molecule fits the token cap");
      std::cerr << "training on " << mols.size() << " molecules (" << dropped << " over the token cap)\n";
      auto mc = c.model;
      mc.vocab_size = static_cast<int>(vocab.size());
      auto model = checkpoint.empty() ? net::Network<float>(mc, c.seed) : load_model(checkpoint, vocab);
      train::Adam adam(model.params(), c.train.beta2, c.train.adam_eps);
      auto cb = epoch_logger();
      cb.on_epoch = [&](const train::EpochMetrics&, const net::Network<float>& m, const train::Adam& a) {
        const auto state = a.state();
        net::save_checkpoint(out, m, vocab.content_hash(), &state);
      };
      train::train(model, train::autoencoding_pairs(mols), vocab, c.train, cb, &adam);
    } else if (generate->parsed()) {
      if (smiles.empty() && hex.empty()) throw CLI::ValidationError("generate", "--smiles or --fingerprint required");
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      const auto model = load_model(checkpoint, vocab);
      print_stream(std::cout, decode(model, vocab, query_fingerprint(smiles, hex), decoder, top, width, tries, c));
    } else if (recover->parsed()) {
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      const auto model = load_model(checkpoint, vocab);
      auto mols = read_lines(in);
      if (limit > 0 && mols.size() > limit) mols.resize(limit);
      recovery::DecoderChoice choice;
      choice.kind = decoder == "astar" ? recovery::Decoder::AStar
                    : decoder == "beam" ? recovery::Decoder::Beam
                                        : recovery::Decoder::Sample;
      choice.width = width;
      choice.tries = tries;
      choice.seed = c.seed;
      std::ofstream jsonl;
      if (!out.empty()) jsonl = open_out(out);
      const auto m = recovery::evaluate_recovery(model, vocab, mols, c.search, choice, out.empty() ? nullptr : &jsonl);
      std::cout << m.summary_json() << "\n";
    } else if (pairs->parsed()) {
      const auto scorer = transfer::make_scorer(scorer_name, c.seed);
      const auto p = transfer::build_matched_pairs(read_lines(in), *scorer, c.pairs);
      transfer::write_pairs(out, p);
      std::cerr << "wrote " << p.size() << " pairs\n";
    } else if (finetune->parsed()) {
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      net::OptimizerState opt;
      auto model = net::load_checkpoint(checkpoint, vocab.content_hash(), &opt);
      const auto p = transfer::read_pairs(in);
      transfer::finetune(model, p, vocab, c.finetune, epoch_logger());
      net::save_checkpoint(out, model, vocab.content_hash());
    } else if (benchmark->parsed()) {
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      const auto inputs = read_lines(in);
      const auto scorer = transfer::make_scorer(scorer_name, c.seed);
      std::vector<std::vector<search::Candidate>> streams;
      if (checkpoints.size() == 1) {
        streams = transfer::generate_streams(load_model(checkpoints[0], vocab), vocab, inputs, k, c.search);
      } else {
        std::vector<std::vector<std::vector<search::Candidate>>> per_model;
        for (const auto& path : checkpoints) {
          per_model.push_back(transfer::generate_streams(load_model(path, vocab), vocab, inputs, k, c.search));
        }
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          std::vector<std::vector<search::Candidate>> s;
          for (const auto& m : per_model) s.push_back(m[i]);
          streams.push_back(search::ensemble_stream(s, k));
        }
      }
      const auto r = transfer::evaluate_streams(inputs, streams, *scorer, sim, k);
      if (!out.empty()) open_out(out) << r.to_json() << "\n";
      std::cout << "success_rate\t" << r.success_rate << "\ndiversity\t" << r.diversity << "\n";
      for (const std::size_t n : {1, 3, 10, 20}) {
        if (n <= k) std::cout << "failure_rate@" << n << '\t' << r.failure_rate_at(n) << "\n";
      }
    } else if (land->parsed()) {
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      const auto model = load_model(checkpoint, vocab);
      const auto basis = landscape::plane_from_three(landscape::embedding_of(model, anchors[0]),
                                                     landscape::embedding_of(model, anchors[1]),
                                                     landscape::embedding_of(model, anchors[2]));
      auto stream = open_out(out);
      landscape::sample_grid(model, vocab, basis, c.landscape).write_csv(stream);
    } else if (correlate->parsed()) {
      const auto model = net::load_checkpoint(checkpoint, 0);
      auto mols = read_lines(in);
      if (limit > 0 && mols.size() > limit) mols.resize(limit);
      const auto r = landscape::distance_correlation(model, mols, c.correlate);
      open_out(out) << r.to_json() << "\n";
      std::cout << "pearson_r\t" << r.r << "\npairs\t" << r.pairs << "\n";
    } else if (ensemble->parsed()) {
      const auto vocab = tokenizer::Vocabulary::load(vocab_path);
      const auto fp = query_fingerprint(smiles, "");
      std::vector<std::vector<search::Candidate>> streams;
      for (const auto& path : checkpoints) {
        const auto model = load_model(path, vocab);
        streams.push_back(search::astar_stream(search::NetworkModel(model), vocab, model.encode(fp), c.search, top));
      }
      print_stream(std::cout, search::ensemble_stream(streams, top));
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const config::UnknownKey& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const config::SyntaxError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const config::TypeError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const landscape::DegeneratePlane& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
