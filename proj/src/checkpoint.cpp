/*
 * Copyright 2026 The dsgas Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "dsgas/trainer.hpp"

namespace dsgas {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'G', 'S'};

struct Blob {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

// Explicit little-endian encoding, independent of the host byte order.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string buf, std::string file) : buf_(std::move(buf)), file_(std::move(file)) {}

  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw std::runtime_error("checkpoint " + file_ + ": truncated file");
  }
  std::string buf_;
  std::string file_;
  std::size_t pos_ = 0;
};

Blob tensor_blob(const std::string& name, const Tensor& t) {
  return {name, {t.rows(), t.cols()}, std::vector<double>(t.values().begin(), t.values().end())};
}

Blob vector_blob(const std::string& name, const std::vector<double>& v) { return {name, {v.size()}, v}; }

Blob scalar_blob(const std::string& name, double v) { return {name, {1}, {v}}; }

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const SearchConfig& config, const TrainState& state) {
  std::vector<Blob> blobs;
  const std::string text = config.to_yaml();
  blobs.push_back({"meta.config", {text.size()}, std::vector<double>(text.begin(), text.end())});
  blobs.push_back(scalar_blob("meta.in_dim", static_cast<double>(state.in_dim)));
  blobs.push_back(scalar_blob("state.epoch", static_cast<double>(state.epoch)));

  state.net.visit(SuperNet::ConstVisitor(
      [&](ParamGroup, const std::string& name, const Tensor& t) { blobs.push_back(tensor_blob(name, t)); }));
  const std::vector<Tensor> head = state.head.parameters();
  const char* head_names[] = {"head.w1", "head.b1", "head.w2", "head.b2"};
  for (std::size_t i = 0; i < head.size(); ++i) blobs.push_back(tensor_blob(head_names[i], head[i]));

  // Optimizer state; Adam moments are aligned with weight_params().
  const Adam& adam = state.adam;
  blobs.push_back(scalar_blob("adam.t", static_cast<double>(adam.steps())));
  const auto names = state.weight_param_names();
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    blobs.push_back(vector_blob("adam.m/" + names.at(i), adam.first_moments()[i]));
    blobs.push_back(vector_blob("adam.v/" + names.at(i), adam.second_moments()[i]));
  }
  const Sgd& sgd = state.sgd;
  for (std::size_t i = 0; i < sgd.velocity().size(); ++i)
    blobs.push_back(vector_blob("sgd.v/" + state.net.slots.at(i).name, sgd.velocity()[i]));

  blobs.push_back(vector_blob("curve.loss_w", state.loss_w));
  blobs.push_back(vector_blob("curve.loss_alpha", state.loss_alpha));
  blobs.push_back(vector_blob("curve.alpha_cosine", state.alpha_cosine));

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(config.hash());
  w.u32(static_cast<std::uint32_t>(blobs.size()));
  for (const Blob& b : blobs) {
    w.u32(static_cast<std::uint32_t>(b.name.size()));
    w.bytes(b.name.data(), b.name.size());
    w.u32(static_cast<std::uint32_t>(b.dims.size()));
    for (auto d : b.dims) w.u64(d);
    for (double v : b.data) w.f64(v);
  }

  // Write then rename so an interrupted save never leaves a torn file.
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw std::runtime_error("short write on checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + file.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(buf), file.string());

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("checkpoint " + file.string() + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint " + file.string() + ": unsupported version " + std::to_string(version));
  const std::uint64_t hash = r.u64();
  const std::uint32_t count = r.u32();

  std::map<std::string, Blob> blobs;
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    b.name.resize(r.u32());
    r.bytes(b.name.data(), b.name.size());
    const std::uint32_t rank = r.u32();
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      b.dims.push_back(r.u64());
      n *= b.dims.back();
    }
    if (n > r.remaining() / sizeof(double))
      throw std::runtime_error("checkpoint " + file.string() + ": blob '" + b.name + "' exceeds the file");
    b.data.resize(n);
    for (auto& v : b.data) v = r.f64();
    blobs[b.name] = std::move(b);
  }
  if (!r.done()) throw std::runtime_error("checkpoint " + file.string() + ": trailing bytes");

  auto get = [&](const std::string& name) -> const Blob& {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw std::runtime_error("checkpoint " + file.string() + ": missing blob '" + name + "'");
    return it->second;
  };
  auto scalar = [&](const std::string& name) {
    const Blob& b = get(name);
    if (b.data.size() != 1) throw std::runtime_error("checkpoint: blob '" + name + "' is not a scalar");
    return b.data[0];
  };

  const Blob& meta = get("meta.config");
  std::string text(meta.data.size(), '\0');
  for (std::size_t i = 0; i < text.size(); ++i) text[i] = static_cast<char>(meta.data[i]);

  Checkpoint ck;
  ck.config = parse_search_config(text);
  ck.config_hash = hash;
  if (ck.config.hash() != hash)
    throw std::runtime_error("checkpoint " + file.string() + ": config hash does not match the embedded config");

  TrainState& s = ck.state;
  s = init_train_state(ck.config, static_cast<std::size_t>(scalar("meta.in_dim")));
  s.epoch = static_cast<std::size_t>(scalar("state.epoch"));

  auto fill = [&](const std::string& name, Tensor& t) {
    const Blob& b = get(name);
    if (b.dims.size() != 2 || b.dims[0] != t.rows() || b.dims[1] != t.cols())
      throw std::runtime_error("checkpoint: blob '" + name + "' has the wrong shape");
    std::copy(b.data.begin(), b.data.end(), t.mutable_values().begin());
  };
  s.net.visit(SuperNet::Visitor([&](ParamGroup, const std::string& name, Tensor& t) { fill(name, t); }));
  fill("head.w1", s.head.w1);
  fill("head.b1", s.head.b1);
  fill("head.w2", s.head.w2);
  fill("head.b2", s.head.b2);

  const auto t = static_cast<std::uint64_t>(scalar("adam.t"));
  const auto names = s.weight_param_names();
  const auto params = s.weight_params();
  std::vector<std::vector<double>> m, v;
  if (blobs.count("adam.m/" + names.front())) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      m.push_back(get("adam.m/" + names[i]).data);
      v.push_back(get("adam.v/" + names[i]).data);
      if (m.back().size() != params[i].size() || v.back().size() != params[i].size())
        throw std::runtime_error("checkpoint: Adam state for '" + names[i] + "' has the wrong size");
    }
  }
  s.adam.restore(t, std::move(m), std::move(v));

  std::vector<std::vector<double>> vel;
  if (blobs.count("sgd.v/" + s.net.slots.front().name))
    for (std::size_t i = 0; i < s.net.slots.size(); ++i) vel.push_back(get("sgd.v/" + s.net.slots[i].name).data);
  s.sgd.restore(std::move(vel));

  s.loss_w = get("curve.loss_w").data;
  s.loss_alpha = get("curve.loss_alpha").data;
  s.alpha_cosine = get("curve.alpha_cosine").data;
  return ck;
}

}  // namespace dsgas
