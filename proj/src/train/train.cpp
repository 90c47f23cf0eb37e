// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "desmiles/chem.hpp"
#include "desmiles/train.hpp"

namespace desmiles::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(max_lr > 0)) throw std::invalid_argument("max_lr must be positive");
  if (!(dividing_factor > 1)) throw std::invalid_argument("dividing_factor must exceed 1");
  if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(beta2 > 0 && beta2 < 1) || !(adam_eps > 0)) throw std::invalid_argument("invalid Adam constants");
}

Schedule one_cycle(double t, double max_lr, double div) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("step fraction outside [0, 1]");
  const double low = max_lr / div;
  if (t < kPhaseUp) {
    const double a = t / kPhaseUp;
    return {low + a * (max_lr - low), kMomentumHigh + a * (kMomentumLow - kMomentumHigh)};
  }
  if (t < kPhaseDown) {
    const double a = (t - kPhaseUp) / (kPhaseDown - kPhaseUp);
    return {max_lr + a * (low - max_lr), kMomentumLow + a * (kMomentumHigh - kMomentumLow)};
  }
  const double a = (t - kPhaseDown) / (1.0 - kPhaseDown);
  const double end = low / (div * div);
  return {low + a * (end - low), kMomentumHigh};
}

double global_norm(const net::Parameters<float>& grads) {
  double sq = 0.0;
  net::for_each_tensor(
      [&](const std::string&, const auto& g) { sq += g.template cast<double>().squaredNorm(); }, grads);
  return std::sqrt(sq);
}

double clip_gradient_norm(net::Parameters<float>& grads, double clip_norm) {
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw NonFiniteGradient();
  if (norm > clip_norm) {
    const float scale = static_cast<float>(clip_norm / norm);
    net::for_each_tensor([&](const std::string&, auto& g) { g *= scale; }, grads);
  }
  return norm;
}

Adam::Adam(const net::Parameters<float>& like, double beta2, double eps)
    : m_(like.zeros_like()), v_(like.zeros_like()), beta2_(beta2), eps_(eps) {}

void Adam::step(net::Parameters<float>& params, const net::Parameters<float>& grads, double lr, double momentum,
                double weight_decay, bool freeze_first_layer) {
  ++t_;
  const double bc1 = 1.0 - std::pow(momentum, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(momentum), b2 = static_cast<float>(beta2_);
  const float step_size = static_cast<float>(lr / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(eps_);
  const float decay = static_cast<float>(1.0 - weight_decay);
  net::for_each_tensor(
      [&](const std::string& name, auto& w, const auto& g, auto& m, auto& v) {
        if (freeze_first_layer && net::in_first_encoder_layer(name)) return;
        m = b1 * m + (1.0f - b1) * g;
        v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
        w.array() -= step_size * m.array() / (v.array().sqrt() * inv_bc2 + eps);
        w *= decay;
      },
      params, grads, m_, v_);
}

net::OptimizerState Adam::state() const {
  net::OptimizerState s;
  s.step = t_;
  net::for_each_tensor(
      [&](const std::string& name, const auto& m, const auto& v) {
        s.tensors.emplace_back("adam.m." + name, net::Mat<float>(m));
        s.tensors.emplace_back("adam.v." + name, net::Mat<float>(v));
      },
      m_, v_);
  return s;
}

void Adam::restore(const net::OptimizerState& s) {
  t_ = s.step;
  for (const auto& [key, t] : s.tensors) {
    net::for_each_tensor(
        [&](const std::string& name, auto& m, auto& v) {
          if (key == "adam.m." + name && t.size() == m.size()) m = Eigen::Map<const net::Mat<float>>(t.data(), m.rows(), m.cols());
          if (key == "adam.v." + name && t.size() == v.size()) v = Eigen::Map<const net::Mat<float>>(t.data(), v.rows(), v.cols());
        },
        m_, v_);
  }
}

std::vector<TrainingPair> autoencoding_pairs(std::span<const std::string> smiles) {
  std::vector<TrainingPair> out;
  out.reserve(smiles.size());
  for (const auto& s : smiles) {
    const auto g = chem::parse_smiles(s);
    out.push_back({fingerprint::input_fingerprint(g), chem::write_canonical_smiles(g)});
  }
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<EpochMetrics> train(net::Network<float>& model, std::span<const TrainingPair> data,
                                const tokenizer::Vocabulary& vocab, const TrainConfig& config,
                                const Callbacks& callbacks, Adam* optimizer) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("empty training set");
  if (vocab.size() != static_cast<std::size_t>(model.config().vocab_size))
    throw std::invalid_argument("vocabulary size does not match the model");

  std::vector<std::vector<net::TokenId>> forward(data.size()), reversed(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward[i] = tokenizer::encode(vocab, data[i].target, false).ids;
    reversed[i] = tokenizer::encode(vocab, data[i].target, true).ids;
  }

  Adam local(model.params(), config.beta2, config.adam_eps);
  Adam& adam = optimizer ? *optimizer : local;
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t batches_per_epoch = (n + bs - 1) / bs;
  const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(config.epochs);
  std::mt19937_64 rng(config.rng_seed);
  net::ForwardOptions fopt;
  fopt.freeze_first_encoder_layer = config.freeze_first_encoder_layer;
  const double wd = model.config().weight_decay_factor;

  std::vector<EpochMetrics> history;
  std::size_t step = 0, skipped_total = 0;
  net::Parameters<float> grads;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // Direction choice per molecule, then length buckets over a shuffled order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> rev(n);
    std::size_t n_rev = 0;
    for (std::size_t i = 0; i < n; ++i) {
      rev[i] = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
      n_rev += static_cast<std::size_t>(rev[i]);
    }
    const auto seq = [&](std::size_t i) -> const std::vector<net::TokenId>& { return rev[i] ? reversed[i] : forward[i]; };
    const std::size_t chunk = bs * 50;
    for (std::size_t s = 0; s < n; s += chunk) {
      const auto e = std::min(n, s + chunk);
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(e),
                       [&](std::size_t a, std::size_t b) { return seq(a).size() < seq(b).size(); });
    }
    std::vector<std::size_t> batch_starts;
    for (std::size_t s = 0; s < n; s += bs) batch_starts.push_back(s);
    std::shuffle(batch_starts.begin(), batch_starts.end(), rng);

    EpochMetrics m;
    m.epoch = epoch;
    m.reversed_fraction = static_cast<double>(n_rev) / static_cast<double>(n);
    double tokens = 0;
    for (std::size_t start : batch_starts) {
      std::vector<net::Example> batch;
      for (std::size_t k = start; k < std::min(n, start + bs); ++k)
        batch.push_back({&data[order[k]].fp, seq(order[k])});
      const double t = static_cast<double>(step) / static_cast<double>(total_steps);
      const Schedule sched = one_cycle(t, config.max_lr, config.dividing_factor);
      const auto loss = model.forward_backward(batch, mix(config.rng_seed ^ mix(step)), fopt, &grads);
      ++step;
      ++m.steps;
      double norm = 0;
      try {
        if (!std::isfinite(loss.total)) throw NonFiniteGradient();
        norm = clip_gradient_norm(grads, config.clip_norm);
      } catch (const NonFiniteGradient&) {
        ++m.skipped;
        ++skipped_total;
        if (callbacks.log) *callbacks.log << "skip epoch=" << epoch << " step=" << step << " non-finite gradient\n";
        if (step >= 100 && static_cast<double>(skipped_total) > 0.01 * static_cast<double>(step))
          throw TrainingAborted("more than 1% of optimisation steps had non-finite gradients");
        continue;
      }
      adam.step(model.params(), grads, sched.lr, sched.momentum, wd, config.freeze_first_encoder_layer);
      const double w = static_cast<double>(loss.tokens);
      m.nll += loss.nll * w;
      m.ar += loss.ar * w;
      m.tar += loss.tar * w;
      m.total += loss.total * w;
      tokens += w;
      if (callbacks.log && config.log_every > 0 && step % static_cast<std::size_t>(config.log_every) == 0)
        *callbacks.log << "step epoch=" << epoch << " step=" << step << " lr=" << sched.lr
                       << " momentum=" << sched.momentum << " nll=" << loss.nll << " ar=" << loss.ar
                       << " tar=" << loss.tar << " grad_norm=" << norm << '\n';
    }
    if (tokens > 0) {
      m.nll /= tokens;
      m.ar /= tokens;
      m.tar /= tokens;
      m.total /= tokens;
    }
    if (callbacks.log)
      *callbacks.log << "epoch epoch=" << epoch << " step=" << step << " nll=" << m.nll << " ar=" << m.ar
                     << " tar=" << m.tar << " total=" << m.total << " skipped=" << m.skipped
                     << " reversed=" << m.reversed_fraction << std::endl;
    history.push_back(m);
    if (callbacks.on_epoch) callbacks.on_epoch(m, model, adam);
  }
  if (static_cast<double>(skipped_total) > 0.01 * static_cast<double>(step))
    throw TrainingAborted("more than 1% of optimisation steps had non-finite gradients");
  return history;
}

}  // namespace desmiles::train
