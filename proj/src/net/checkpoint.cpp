// SPDX-License-Identifier: Apache-2.0
//
// Container layout (all integers little-endian):
//   "DESMILES" | u32 version | u64 vocab hash | u32 n, n bytes of JSON
//   (model config + optimizer step) | u32 tensor count | per tensor:
//   u32 name length, name, u64 rows, u64 cols, rows*cols float32 in
//   column-major order.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "desmiles/net.hpp"

namespace desmiles::net {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'E', 'S', 'M', 'I', 'L', 'E', 'S'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const float* data, std::uint64_t rows,
                std::uint64_t cols) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(out, rows);
  put<std::uint64_t>(out, cols);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(rows * cols * sizeof(float)));
}

std::vector<std::pair<std::string, const Vec<float>*>> running_tensors(const RunningStats<float>& r) {
  return {{"encoder.bn1.running_mean", &r.mean1},
          {"encoder.bn1.running_var", &r.var1},
          {"encoder.bn2.running_mean", &r.mean2},
          {"encoder.bn2.running_var", &r.var2}};
}

}  // namespace

void save_checkpoint(const std::string& path, const Network<float>& net, std::uint64_t vocab_hash,
                     const OptimizerState* optimizer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, vocab_hash);
    nlohmann::ordered_json meta;
    meta["config"] = nlohmann::json::parse(net.config().to_json());
    meta["optimizer_step"] = optimizer ? optimizer->step : 0;
    const std::string js = meta.dump();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(js.size()));
    out.write(js.data(), static_cast<std::streamsize>(js.size()));

    std::uint32_t count = 4;
    for_each_tensor([&](const std::string&, const auto&) { ++count; }, net.params());
    if (optimizer) count += static_cast<std::uint32_t>(optimizer->tensors.size());
    put<std::uint32_t>(out, count);
    for_each_tensor(
        [&](const std::string& name, const auto& t) {
          put_tensor(out, name, t.data(), static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols()));
        },
        net.params());
    for (const auto& [name, t] : running_tensors(net.running()))
      put_tensor(out, name, t->data(), static_cast<std::uint64_t>(t->size()), 1);
    if (optimizer)
      for (const auto& [name, t] : optimizer->tensors)
        put_tensor(out, name, t.data(), static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols()));
    if (!out) throw CheckpointError("write failed for checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into place: " + path);
}

Network<float> load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash,
                               OptimizerState* optimizer, std::uint64_t* vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint: " + path);
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto hash = get<std::uint64_t>(in);
  if (vocab_hash) *vocab_hash = hash;
  if (expected_vocab_hash != 0 && hash != expected_vocab_hash)
    throw CheckpointError("checkpoint was trained with a different vocabulary");
  std::string js(get<std::uint32_t>(in), '\0');
  in.read(js.data(), static_cast<std::streamsize>(js.size()));
  if (!in) throw CheckpointError("truncated checkpoint header");
  const auto meta = nlohmann::json::parse(js);
  const auto config = ModelConfig::from_json(meta.at("config").dump());

  std::map<std::string, Mat<float>> tensors;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(get<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Mat<float> t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(rows * cols * sizeof(float)));
    if (!in) throw CheckpointError("truncated tensor " + name);
    tensors.emplace(std::move(name), std::move(t));
  }

  Network<float> net(config, 0);
  const auto take = [&](const std::string& name, auto& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols())
      throw CheckpointError("tensor " + name + " has the wrong shape");
    dst = it->second;
    tensors.erase(it);
  };
  for_each_tensor(take, net.params());
  auto& r = net.running();
  take("encoder.bn1.running_mean", r.mean1);
  take("encoder.bn1.running_var", r.var1);
  take("encoder.bn2.running_mean", r.mean2);
  take("encoder.bn2.running_var", r.var2);
  if (optimizer) {
    optimizer->step = meta.value("optimizer_step", std::int64_t{0});
    optimizer->tensors.clear();
    for (auto& [name, t] : tensors) optimizer->tensors.emplace_back(name, std::move(t));
  }
  return net;
}

std::uint64_t tensor_checksum(const Parameters<float>& p, bool first_encoder_layer_only) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for_each_tensor(
      [&](const std::string& name, const auto& t) {
        if (first_encoder_layer_only && !in_first_encoder_layer(name)) return;
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
        for (std::size_t i = 0; i < static_cast<std::size_t>(t.size()) * sizeof(float); ++i) {
          h ^= bytes[i];
          h *= 0x100000001b3ULL;
        }
      },
      p);
  return h;
}

}  // namespace desmiles::net
