// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <json.hpp>

#include "desmiles/net.hpp"

namespace desmiles::net {

void ModelConfig::validate() const {
  if (input_bits <= 0 || embed_dim <= 0 || hidden_dim <= 0 || vocab_size <= tokenizer::kSpecialCount)
    throw std::invalid_argument("model sizes must be positive and the vocabulary larger than the specials");
  if (num_layers < 2) throw std::invalid_argument("the decoder needs at least two recurrent layers");
  for (double p : {p_enc, p_e, p_i, p_h, p_o, dropconnect})
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout rates must lie in [0, 1)");
  if (ar_coeff < 0 || tar_coeff < 0 || weight_decay_factor < 0 || weight_decay_factor >= 1)
    throw std::invalid_argument("regularisation coefficients out of range");
}

void ModelConfig::zero_dropout() { p_enc = p_e = p_i = p_h = p_o = dropconnect = 0.0; }

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["input_bits"] = input_bits;
  j["embed_dim"] = embed_dim;
  j["hidden_dim"] = hidden_dim;
  j["num_layers"] = num_layers;
  j["vocab_size"] = vocab_size;
  j["p_enc"] = p_enc;
  j["p_e"] = p_e;
  j["p_i"] = p_i;
  j["p_h"] = p_h;
  j["p_o"] = p_o;
  j["dropconnect"] = dropconnect;
  j["ar_coeff"] = ar_coeff;
  j["tar_coeff"] = tar_coeff;
  j["weight_decay_factor"] = weight_decay_factor;
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.input_bits = j.at("input_bits").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.p_enc = j.at("p_enc").get<double>();
  c.p_e = j.at("p_e").get<double>();
  c.p_i = j.at("p_i").get<double>();
  c.p_h = j.at("p_h").get<double>();
  c.p_o = j.at("p_o").get<double>();
  c.dropconnect = j.at("dropconnect").get<double>();
  c.ar_coeff = j.at("ar_coeff").get<double>();
  c.tar_coeff = j.at("tar_coeff").get<double>();
  c.weight_decay_factor = j.at("weight_decay_factor").get<double>();
  return c;
}

bool in_first_encoder_layer(const std::string& name) {
  return name.rfind("encoder.bn1.", 0) == 0 || name.rfind("encoder.linear1.", 0) == 0;
}

template <typename S>
Parameters<S> Parameters<S>::zeros_like() const {
  Parameters<S> out;
  out.layers.resize(layers.size());
  for_each_tensor([](const std::string&, auto& dst, const auto& src) { dst.setZero(src.rows(), src.cols()); },
                  out, *this);
  return out;
}

template <typename S>
std::size_t Parameters<S>::count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, *this);
  return n;
}

std::size_t parameter_count(const ModelConfig& c) {
  const auto in = static_cast<std::size_t>(c.input_bits);
  const auto h = static_cast<std::size_t>(c.hidden_dim);
  std::size_t n = 2 * in + in * h + h + 2 * h + h * h + h;
  n += static_cast<std::size_t>(c.vocab_size) * static_cast<std::size_t>(c.embed_dim);
  for (int l = 0; l < c.num_layers; ++l) {
    const auto li = static_cast<std::size_t>(c.layer_input(l));
    const auto lh = static_cast<std::size_t>(c.layer_hidden(l));
    n += 4 * lh * (li + lh) + 8 * lh;
  }
  return n;
}

template <typename S>
Vec<S> fingerprint_vector(const fingerprint::BitFingerprint& fp) {
  Vec<S> v = Vec<S>::Zero(static_cast<Eigen::Index>(fp.width()));
  for (int bit : fp.on_bits()) v(bit) = S(1);
  return v;
}

namespace {

template <typename Derived>
void sigmoid_inplace(Eigen::MatrixBase<Derived>&& m) {
  m.array() = (typename Derived::Scalar(1) + (-m.array()).exp()).inverse();
}

template <typename Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>&& m) {
  m.array() = m.array().tanh();
}

template <typename S>
void log_softmax_columns(Mat<S>& logits) {
  for (Eigen::Index col = 0; col < logits.cols(); ++col) {
    auto c = logits.col(col);
    const S m = c.maxCoeff();
    const S lse = m + std::log((c.array() - m).exp().sum());
    c.array() -= lse;
  }
}

template <typename S>
void fill_uniform(Mat<S>& m, Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  m.resize(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(u(rng));
}

template <typename S>
void fill_uniform(Vec<S>& v, Eigen::Index n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<S>(u(rng));
}

}  // namespace

template <typename S>
Network<S>::Network(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config.validate();
  std::mt19937_64 rng(init_seed);
  const Eigen::Index in = config.input_bits, h = config.hidden_dim, e = config.embed_dim;
  auto& p = params_;
  p.bn1_gamma = Vec<S>::Ones(in);
  p.bn1_beta = Vec<S>::Zero(in);
  fill_uniform(p.enc1_w, h, in, 1.0 / std::sqrt(double(in)), rng);
  fill_uniform(p.enc1_b, h, 1.0 / std::sqrt(double(in)), rng);
  p.bn2_gamma = Vec<S>::Ones(h);
  p.bn2_beta = Vec<S>::Zero(h);
  fill_uniform(p.enc2_w, h, h, 1.0 / std::sqrt(double(h)), rng);
  fill_uniform(p.enc2_b, h, 1.0 / std::sqrt(double(h)), rng);
  std::normal_distribution<double> normal(0.0, 0.01);
  p.embedding.resize(e, config.vocab_size);
  for (Eigen::Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = static_cast<S>(normal(rng));
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (int l = 0; l < config.num_layers; ++l) {
    auto& L = p.layers[static_cast<std::size_t>(l)];
    const Eigen::Index li = config.layer_input(l), lh = config.layer_hidden(l);
    fill_uniform(L.w_ih, 4 * lh, li, 1.0 / std::sqrt(double(li)), rng);
    fill_uniform(L.w_hh, 4 * lh, lh, 1.0 / std::sqrt(double(lh)), rng);
    fill_uniform(L.b_ih, 4 * lh, 1.0 / std::sqrt(double(lh)), rng);
    fill_uniform(L.b_hh, 4 * lh, 1.0 / std::sqrt(double(lh)), rng);
    L.b_ih.segment(lh, lh).setOnes();
    L.b_hh.segment(lh, lh).setZero();
  }
  running_.mean1 = Vec<S>::Zero(in);
  running_.var1 = Vec<S>::Ones(in);
  running_.mean2 = Vec<S>::Zero(h);
  running_.var2 = Vec<S>::Ones(h);
}

template <typename S>
Vec<S> Network<S>::embed(const fingerprint::BitFingerprint& fp) const {
  if (fp.width() != static_cast<std::size_t>(config_.input_bits))
    throw fingerprint::WidthMismatch(fp.width(), static_cast<std::size_t>(config_.input_bits));
  const Vec<S> x = fingerprint_vector<S>(fp);
  const auto& p = params_;
  const Vec<S> y = (p.bn1_gamma.array() * (x - running_.mean1).array() /
                    (running_.var1.array() + S(kBatchNormEps)).sqrt() + p.bn1_beta.array()).matrix();
  Vec<S> a = p.enc1_w * y + p.enc1_b;
  return a.array().tanh().matrix();
}

template <typename S>
DecoderState Network<S>::initial_state(const Vec<S>& embedding) const {
  if (embedding.size() != config_.hidden_dim) throw ShapeMismatch("embedding width does not match hidden_dim");
  const auto& p = params_;
  const Vec<S> y = (p.bn2_gamma.array() * (embedding - running_.mean2).array() /
                    (running_.var2.array() + S(kBatchNormEps)).sqrt() + p.bn2_beta.array()).matrix();
  const Vec<S> e = (p.enc2_w * y + p.enc2_b).array().tanh().matrix();
  DecoderState s;
  for (int l = 0; l < config_.num_layers; ++l) {
    if (l == 0) {
      s.h.push_back(e.template cast<float>());
      s.c.push_back(e.template cast<float>());
    } else {
      s.h.push_back(Eigen::VectorXf::Zero(config_.layer_hidden(l)));
      s.c.push_back(Eigen::VectorXf::Zero(config_.layer_hidden(l)));
    }
  }
  return s;
}

template <typename S>
void Network<S>::step(const DecoderState& state, TokenId token, DecoderState& next,
                      Eigen::VectorXf& log_probs) const {
  const DecoderState* states[] = {&state};
  const TokenId tokens[] = {token};
  std::vector<DecoderState> out;
  Eigen::MatrixXf lp;
  step_batch(states, tokens, out, lp);
  next = std::move(out[0]);
  log_probs = lp.col(0);
}

template <typename S>
void Network<S>::step_batch(std::span<const DecoderState* const> states, std::span<const TokenId> tokens,
                            std::vector<DecoderState>& next, Eigen::MatrixXf& log_probs) const {
  if (states.size() != tokens.size()) throw ShapeMismatch("states and tokens differ in length");
  const Eigen::Index B = static_cast<Eigen::Index>(states.size());
  const auto& p = params_;
  Mat<S> x(config_.embed_dim, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const TokenId t = tokens[static_cast<std::size_t>(b)];
    if (t < 0 || t >= config_.vocab_size) throw InvalidToken(t);
    x.col(b) = p.embedding.col(t);
  }
  next.assign(static_cast<std::size_t>(B), DecoderState{});
  for (auto& s : next) {
    s.h.resize(static_cast<std::size_t>(config_.num_layers));
    s.c.resize(static_cast<std::size_t>(config_.num_layers));
  }
  for (int l = 0; l < config_.num_layers; ++l) {
    const auto& L = p.layers[static_cast<std::size_t>(l)];
    const Eigen::Index H = config_.layer_hidden(l);
    Mat<S> h(H, B), c(H, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& s = *states[static_cast<std::size_t>(b)];
      h.col(b) = s.h[static_cast<std::size_t>(l)].template cast<S>();
      c.col(b) = s.c[static_cast<std::size_t>(l)].template cast<S>();
    }
    Mat<S> gates = L.w_ih * x;
    gates.noalias() += L.w_hh * h;
    gates.colwise() += L.b_ih + L.b_hh;
    sigmoid_inplace(gates.topRows(2 * H));
    tanh_inplace(gates.middleRows(2 * H, H));
    sigmoid_inplace(gates.bottomRows(H));
    c = gates.middleRows(H, H).cwiseProduct(c) + gates.topRows(H).cwiseProduct(gates.middleRows(2 * H, H));
    x = gates.bottomRows(H).cwiseProduct(c.array().tanh().matrix());
    for (Eigen::Index b = 0; b < B; ++b) {
      next[static_cast<std::size_t>(b)].h[static_cast<std::size_t>(l)] = x.col(b).template cast<float>();
      next[static_cast<std::size_t>(b)].c[static_cast<std::size_t>(l)] = c.col(b).template cast<float>();
    }
  }
  Mat<S> logits = p.embedding.transpose() * x;
  log_softmax_columns(logits);
  log_probs = logits.template cast<float>();
}

template <typename S>
double Network<S>::sequence_log_prob(const fingerprint::BitFingerprint& fp, std::span<const TokenId> tokens) const {
  if (tokens.empty() || tokens[0] != tokenizer::kStart) throw ShapeMismatch("sequence must begin with START");
  DecoderState state = encode(fp), next;
  Eigen::VectorXf lp;
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    step(state, tokens[t], next, lp);
    const TokenId y = tokens[t + 1];
    if (y < 0 || y >= config_.vocab_size) throw InvalidToken(y);
    total += lp(y);
    state = std::move(next);
  }
  return total;
}

template <typename S>
LossBreakdown<S> Network<S>::forward_backward(std::span<const Example> batch, std::uint64_t rng_seed,
                                              const ForwardOptions& opt, Parameters<S>* grads) {
  const auto& cfg = config_;
  auto& p = params_;
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  if (B == 0) throw ShapeMismatch("empty batch");
  Eigen::Index T = 0;
  std::vector<Eigen::Index> steps(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& ex = batch[static_cast<std::size_t>(b)];
    if (ex.fp->width() != static_cast<std::size_t>(cfg.input_bits))
      throw fingerprint::WidthMismatch(ex.fp->width(), static_cast<std::size_t>(cfg.input_bits));
    if (ex.tokens.size() < 2) throw ShapeMismatch("training sequence shorter than two tokens");
    for (TokenId t : ex.tokens)
      if (t < 0 || t >= cfg.vocab_size) throw InvalidToken(t);
    steps[static_cast<std::size_t>(b)] = static_cast<Eigen::Index>(ex.tokens.size()) - 1;
    T = std::max(T, steps[static_cast<std::size_t>(b)]);
  }
  const int L = cfg.num_layers;
  const Eigen::Index E = cfg.embed_dim, Hd = cfg.hidden_dim, V = cfg.vocab_size;
  const Eigen::Index TB = T * B;
  const auto col = [B](Eigen::Index t, Eigen::Index b) { return t * B + b; };
  const auto valid = [&](Eigen::Index t, Eigen::Index b) { return t < steps[static_cast<std::size_t>(b)]; };

  std::mt19937_64 rng(rng_seed);
  const auto mask = [&](Eigen::Index rows, Eigen::Index cols, double rate) {
    Mat<S> m = Mat<S>::Ones(rows, cols);
    if (!opt.dropout || rate <= 0.0) return m;
    std::bernoulli_distribution keep(1.0 - rate);
    const S scale = S(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : S(0);
    return m;
  };
  const Mat<S> mask_enc = mask(Hd, B, cfg.p_enc);
  const Mat<S> mask_emb = mask(V, 1, cfg.p_e);
  const Mat<S> mask_in = mask(E, B, cfg.p_i);
  std::vector<Mat<S>> mask_dc, mask_h;
  for (int l = 0; l < L; ++l) {
    const Eigen::Index H = cfg.layer_hidden(l);
    mask_dc.push_back(mask(4 * H, H, cfg.dropconnect));
  }
  for (int l = 0; l + 1 < L; ++l) mask_h.push_back(mask(cfg.layer_hidden(l), B, cfg.p_h));
  const Mat<S> mask_out = mask(E, B, cfg.p_o);

  // Encoder.
  Mat<S> X(cfg.input_bits, B);
  for (Eigen::Index b = 0; b < B; ++b) X.col(b) = fingerprint_vector<S>(*batch[static_cast<std::size_t>(b)].fp);
  const S eps = S(kBatchNormEps), mom = S(kBatchNormMomentum);
  const S unbias = B > 1 ? S(B) / S(B - 1) : S(1);

  Vec<S> mu1, var1;
  if (opt.freeze_first_encoder_layer) {
    mu1 = running_.mean1;
    var1 = running_.var1;
  } else {
    mu1 = X.rowwise().mean();
    var1 = (X.colwise() - mu1).array().square().rowwise().mean();
  }
  const Vec<S> inv1 = (var1.array() + eps).rsqrt().matrix();
  const Mat<S> xhat1 = ((X.colwise() - mu1).array().colwise() * inv1.array()).matrix();
  const Mat<S> Y1 = ((xhat1.array().colwise() * p.bn1_gamma.array()).colwise() + p.bn1_beta.array()).matrix();
  Mat<S> A1 = p.enc1_w * Y1;
  A1.colwise() += p.enc1_b;
  tanh_inplace(A1.block(0, 0, A1.rows(), A1.cols()));

  const Vec<S> mu2 = A1.rowwise().mean();
  const Vec<S> var2 = (A1.colwise() - mu2).array().square().rowwise().mean();
  const Vec<S> inv2 = (var2.array() + eps).rsqrt().matrix();
  const Mat<S> xhat2 = ((A1.colwise() - mu2).array().colwise() * inv2.array()).matrix();
  const Mat<S> Y2 = ((xhat2.array().colwise() * p.bn2_gamma.array()).colwise() + p.bn2_beta.array()).matrix();
  const Mat<S> D2 = Y2.cwiseProduct(mask_enc);
  Mat<S> Eenc = p.enc2_w * D2;
  Eenc.colwise() += p.enc2_b;
  tanh_inplace(Eenc.block(0, 0, Eenc.rows(), Eenc.cols()));

  if (opt.update_running_stats) {
    if (!opt.freeze_first_encoder_layer) {
      running_.mean1 = (S(1) - mom) * running_.mean1 + mom * mu1;
      running_.var1 = (S(1) - mom) * running_.var1 + mom * unbias * var1;
    }
    running_.mean2 = (S(1) - mom) * running_.mean2 + mom * mu2;
    running_.var2 = (S(1) - mom) * running_.var2 + mom * unbias * var2;
  }

  // Decoder, one layer over all time steps at a time.
  std::vector<TokenId> input_token(static_cast<std::size_t>(TB), tokenizer::kStart);
  Mat<S> layer_in(E, TB);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& toks = batch[static_cast<std::size_t>(b)].tokens;
      const TokenId tok = valid(t, b) ? toks[static_cast<std::size_t>(t)] : tokenizer::kStart;
      input_token[static_cast<std::size_t>(col(t, b))] = tok;
      layer_in.col(col(t, b)) = p.embedding.col(tok) * mask_emb(tok, 0);
      layer_in.col(col(t, b)).array() *= mask_in.col(b).array();
    }

  struct LayerCache {
    Mat<S> input;   // in x TB
    Mat<S> h_prev;  // H x TB
    Mat<S> c_prev;
    Mat<S> gates;   // activated, 4H x TB
    Mat<S> tanh_c;
    Mat<S> w_hh;    // DropConnect-masked
  };
  std::vector<LayerCache> cache(static_cast<std::size_t>(L));
  Mat<S> R;  // raw final-layer outputs, E x TB
  for (int l = 0; l < L; ++l) {
    auto& C = cache[static_cast<std::size_t>(l)];
    const auto& W = p.layers[static_cast<std::size_t>(l)];
    const Eigen::Index H = cfg.layer_hidden(l);
    C.input = std::move(layer_in);
    C.w_hh = W.w_hh.cwiseProduct(mask_dc[static_cast<std::size_t>(l)]);
    C.gates = W.w_ih * C.input;
    C.gates.colwise() += W.b_ih + W.b_hh;
    C.h_prev.resize(H, TB);
    C.c_prev.resize(H, TB);
    C.tanh_c.resize(H, TB);
    Mat<S> out(H, TB);
    Mat<S> h = l == 0 ? Eenc : Mat<S>::Zero(H, B);
    Mat<S> c = h;
    for (Eigen::Index t = 0; t < T; ++t) {
      auto g = C.gates.middleCols(t * B, B);
      g.noalias() += C.w_hh * h;
      sigmoid_inplace(g.topRows(2 * H));
      tanh_inplace(g.middleRows(2 * H, H));
      sigmoid_inplace(g.bottomRows(H));
      C.h_prev.middleCols(t * B, B) = h;
      C.c_prev.middleCols(t * B, B) = c;
      c = g.middleRows(H, H).cwiseProduct(c) + g.topRows(H).cwiseProduct(g.middleRows(2 * H, H));
      C.tanh_c.middleCols(t * B, B) = c.array().tanh().matrix();
      h = g.bottomRows(H).cwiseProduct(C.tanh_c.middleCols(t * B, B));
      out.middleCols(t * B, B) = h;
    }
    if (l + 1 < L) {
      layer_in = std::move(out);
      const auto& mh = mask_h[static_cast<std::size_t>(l)];
      for (Eigen::Index t = 0; t < T; ++t) layer_in.middleCols(t * B, B).array() *= mh.array();
    } else {
      R = std::move(out);
    }
  }
  Mat<S> Dout = R;
  for (Eigen::Index t = 0; t < T; ++t) Dout.middleCols(t * B, B).array() *= mask_out.array();

  Mat<S> logp = p.embedding.transpose() * Dout;
  log_softmax_columns(logp);

  std::size_t n_valid = 0, n_pairs = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    n_valid += static_cast<std::size_t>(steps[static_cast<std::size_t>(b)]);
    n_pairs += static_cast<std::size_t>(std::max<Eigen::Index>(0, steps[static_cast<std::size_t>(b)] - 1));
  }
  LossBreakdown<S> loss;
  loss.tokens = n_valid;
  S nll = 0, ar = 0, tar = 0;
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index b = 0; b < B; ++b) {
      if (!valid(t, b)) continue;
      const TokenId y = batch[static_cast<std::size_t>(b)].tokens[static_cast<std::size_t>(t + 1)];
      nll -= logp(y, col(t, b));
      ar += Dout.col(col(t, b)).squaredNorm();
      if (t >= 1) tar += (R.col(col(t, b)) - R.col(col(t - 1, b))).squaredNorm();
    }
  const S nv = S(n_valid), np = S(n_pairs), e = S(E);
  loss.nll = nll / nv;
  loss.ar = S(cfg.ar_coeff) * ar / (nv * e);
  loss.tar = n_pairs > 0 ? S(cfg.tar_coeff) * tar / (np * e) : S(0);
  loss.total = loss.nll + loss.ar + loss.tar;
  if (grads == nullptr) return loss;

  // Backward.
  Parameters<S>& G = *grads;
  G = p.zeros_like();
  Mat<S> dlogits = logp.array().exp().matrix();
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index b = 0; b < B; ++b) {
      auto c = dlogits.col(col(t, b));
      if (!valid(t, b)) {
        c.setZero();
        continue;
      }
      c(batch[static_cast<std::size_t>(b)].tokens[static_cast<std::size_t>(t + 1)]) -= S(1);
      c /= nv;
    }
  G.embedding.noalias() += Dout * dlogits.transpose();
  Mat<S> dD = p.embedding * dlogits;
  const S ar_scale = S(2 * cfg.ar_coeff) / (nv * e);
  const S tar_scale = n_pairs > 0 ? S(2 * cfg.tar_coeff) / (np * e) : S(0);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index b = 0; b < B; ++b)
      if (valid(t, b)) dD.col(col(t, b)) += ar_scale * Dout.col(col(t, b));
  Mat<S> dH = dD;
  for (Eigen::Index t = 0; t < T; ++t) dH.middleCols(t * B, B).array() *= mask_out.array();
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index t = 1; t < steps[static_cast<std::size_t>(b)]; ++t) {
      const Vec<S> diff = tar_scale * (R.col(col(t, b)) - R.col(col(t - 1, b)));
      dH.col(col(t, b)) += diff;
      dH.col(col(t - 1, b)) -= diff;
    }

  Mat<S> dEenc;
  for (int l = L - 1; l >= 0; --l) {
    auto& C = cache[static_cast<std::size_t>(l)];
    const auto& W = p.layers[static_cast<std::size_t>(l)];
    auto& GW = G.layers[static_cast<std::size_t>(l)];
    const Eigen::Index H = cfg.layer_hidden(l);
    Mat<S> dA(4 * H, TB);
    Mat<S> dh_next = Mat<S>::Zero(H, B), dc_next = Mat<S>::Zero(H, B);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const auto g = C.gates.middleCols(t * B, B);
      const auto ig = g.topRows(H).array();
      const auto fg = g.middleRows(H, H).array();
      const auto gg = g.middleRows(2 * H, H).array();
      const auto og = g.bottomRows(H).array();
      const auto tc = C.tanh_c.middleCols(t * B, B).array();
      const Mat<S> dh = dH.middleCols(t * B, B) + dh_next;
      const auto dha = dh.array();
      const Mat<S> dc = (dc_next.array() + dha * og * (S(1) - tc.square())).matrix();
      auto da = dA.middleCols(t * B, B);
      da.topRows(H) = (dc.array() * gg * ig * (S(1) - ig)).matrix();
      da.middleRows(H, H) = (dc.array() * C.c_prev.middleCols(t * B, B).array() * fg * (S(1) - fg)).matrix();
      da.middleRows(2 * H, H) = (dc.array() * ig * (S(1) - gg.square())).matrix();
      da.bottomRows(H) = (dha * tc * og * (S(1) - og)).matrix();
      dc_next = (dc.array() * fg).matrix();
      dh_next.noalias() = C.w_hh.transpose() * da;
    }
    GW.w_ih.noalias() = dA * C.input.transpose();
    GW.w_hh.noalias() = dA * C.h_prev.transpose();
    GW.w_hh = GW.w_hh.cwiseProduct(mask_dc[static_cast<std::size_t>(l)]);
    GW.b_ih = dA.rowwise().sum();
    GW.b_hh = GW.b_ih;
    Mat<S> dX = W.w_ih.transpose() * dA;
    if (l > 0) {
      const auto& mh = mask_h[static_cast<std::size_t>(l - 1)];
      for (Eigen::Index t = 0; t < T; ++t) dX.middleCols(t * B, B).array() *= mh.array();
      dH = std::move(dX);
    } else {
      for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index b = 0; b < B; ++b) {
          const TokenId tok = input_token[static_cast<std::size_t>(col(t, b))];
          G.embedding.col(tok) += mask_emb(tok, 0) * dX.col(col(t, b)).cwiseProduct(mask_in.col(b));
        }
      dEenc = dh_next + dc_next;
    }
  }

  const Mat<S> dZ2 = (dEenc.array() * (S(1) - Eenc.array().square())).matrix();
  G.enc2_w.noalias() = dZ2 * D2.transpose();
  G.enc2_b = dZ2.rowwise().sum();
  const Mat<S> dY2 = (p.enc2_w.transpose() * dZ2).cwiseProduct(mask_enc);
  G.bn2_gamma = dY2.cwiseProduct(xhat2).rowwise().sum();
  G.bn2_beta = dY2.rowwise().sum();
  const Mat<S> dxhat2 = (dY2.array().colwise() * p.bn2_gamma.array()).matrix();
  const Vec<S> sum_dx = dxhat2.rowwise().sum();
  const Vec<S> sum_dxx = dxhat2.cwiseProduct(xhat2).rowwise().sum();
  Mat<S> dA1 = ((S(B) * dxhat2.array()).colwise() - sum_dx.array()).matrix();
  dA1 -= (xhat2.array().colwise() * sum_dxx.array()).matrix();
  dA1 = (dA1.array().colwise() * (inv2.array() / S(B))).matrix();

  if (!opt.freeze_first_encoder_layer) {
    const Mat<S> dZ1 = (dA1.array() * (S(1) - A1.array().square())).matrix();
    G.enc1_w.noalias() = dZ1 * Y1.transpose();
    G.enc1_b = dZ1.rowwise().sum();
    const Mat<S> dY1 = p.enc1_w.transpose() * dZ1;
    G.bn1_gamma = dY1.cwiseProduct(xhat1).rowwise().sum();
    G.bn1_beta = dY1.rowwise().sum();
  }
  return loss;
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Network<float>;
template class Network<double>;
template Vec<float> fingerprint_vector<float>(const fingerprint::BitFingerprint&);
template Vec<double> fingerprint_vector<double>(const fingerprint::BitFingerprint&);

}  // namespace desmiles::net
