// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "desmiles/config.hpp"

namespace desmiles::config {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_integer(std::string_view key, std::string_view text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw TypeError(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw TypeError(std::string(key) + ": expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw TypeError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

std::string show(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Field>
Entry integer(std::string key, Field field) {
  return {key, [key, field](RunConfig& c, std::string_view v) { field(c) = parse_integer<T>(key, v); },
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Entry real(std::string key, Field field) {
  return {key, [key, field](RunConfig& c, std::string_view v) { field(c) = parse_double(key, v); },
          [field](const RunConfig& c) { return show(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Entry boolean(std::string key, Field field) {
  return {key, [key, field](RunConfig& c, std::string_view v) { field(c) = parse_bool(key, v); },
          [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      integer<std::uint64_t>("seed", FIELD(seed)),
      integer<int>("workers", FIELD(workers)),
      integer<int>("model.input_bits", FIELD(model.input_bits)),
      integer<int>("model.embed_dim", FIELD(model.embed_dim)),
      integer<int>("model.hidden_dim", FIELD(model.hidden_dim)),
      integer<int>("model.num_layers", FIELD(model.num_layers)),
      integer<int>("model.vocab_size", FIELD(model.vocab_size)),
      real("model.p_enc", FIELD(model.p_enc)),
      real("model.p_e", FIELD(model.p_e)),
      real("model.p_i", FIELD(model.p_i)),
      real("model.p_h", FIELD(model.p_h)),
      real("model.p_o", FIELD(model.p_o)),
      real("model.dropconnect", FIELD(model.dropconnect)),
      real("model.ar_coeff", FIELD(model.ar_coeff)),
      real("model.tar_coeff", FIELD(model.tar_coeff)),
      real("model.weight_decay_factor", FIELD(model.weight_decay_factor)),
      integer<int>("train.epochs", FIELD(train.epochs)),
      real("train.max_lr", FIELD(train.max_lr)),
      real("train.dividing_factor", FIELD(train.dividing_factor)),
      real("train.clip_norm", FIELD(train.clip_norm)),
      integer<int>("train.batch_size", FIELD(train.batch_size)),
      real("train.beta2", FIELD(train.beta2)),
      real("train.adam_eps", FIELD(train.adam_eps)),
      boolean("train.freeze_first_encoder_layer", FIELD(train.freeze_first_encoder_layer)),
      integer<int>("train.log_every", FIELD(train.log_every)),
      integer<std::size_t>("search.max_branches", FIELD(search.max_branches)),
      integer<std::size_t>("search.max_leaves", FIELD(search.max_leaves)),
      integer<int>("search.max_payload_tokens", FIELD(search.max_payload_tokens)),
      boolean("search.cache_states", FIELD(search.cache_states)),
      integer<int>("finetune.epochs", FIELD(finetune.epochs)),
      real("finetune.max_lr", FIELD(finetune.max_lr)),
      real("finetune.dividing_factor", FIELD(finetune.dividing_factor)),
      boolean("finetune.freeze_first_encoder_layer", FIELD(finetune.freeze_first_encoder_layer)),
      integer<int>("finetune.batch_size", FIELD(finetune.batch_size)),
      integer<std::size_t>("pairs.sample_size", FIELD(pairs.sample_size)),
      real("pairs.top_fraction", FIELD(pairs.top_fraction)),
      integer<std::size_t>("pairs.neighbor_cap", FIELD(pairs.neighbor_cap)),
      real("pairs.sim_threshold", FIELD(pairs.sim_threshold)),
      real("pairs.gap_threshold", FIELD(pairs.gap_threshold)),
      integer<int>("landscape.resolution", FIELD(landscape.resolution)),
      real("landscape.extent", FIELD(landscape.extent)),
      integer<std::size_t>("landscape.top_k", FIELD(landscape.top_k)),
      real("correlate.bin_width", FIELD(correlate.bin_width)),
      integer<std::size_t>("correlate.pairs_per_bin", FIELD(correlate.pairs_per_bin)),
  };
  return table;
}

#undef FIELD

}  // namespace

void RunConfig::propagate_seed() {
  train.rng_seed = seed;
  finetune.rng_seed = seed;
  pairs.seed = seed;
  correlate.seed = seed;
  landscape.budget = search;
  landscape.workers = workers;
}

std::string RunConfig::to_text() const {
  std::string out;
  std::string section;
  for (const auto& e : entries()) {
    const auto dot = e.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : e.key.substr(0, dot);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += (dot == std::string::npos ? e.key : e.key.substr(dot + 1)) + " = " + e.get(*this) + "\n";
  }
  return out;
}

void set_value(RunConfig& config, std::string_view qualified_key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.key == qualified_key) {
      e.set(config, value);
      return;
    }
  }
  throw UnknownKey("unknown configuration key: " + std::string(qualified_key));
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::string section;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw SyntaxError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw SyntaxError(where + "expected key = value");
    const auto key = std::string(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto qualified = section.empty() ? key : section + "." + key;
    try {
      set_value(config, qualified, value);
    } catch (const UnknownKey& e) {
      throw UnknownKey(where + e.what());
    } catch (const TypeError& e) {
      throw TypeError(where + e.what());
    }
  }
  config.propagate_seed();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace desmiles::config
