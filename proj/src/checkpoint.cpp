// Copyright 2026 The M3EL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "m3el/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <zlib.h>

#include "m3el/errors.hpp"

namespace m3el {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void tensor_data(const Tensor& t) {
    for (double v : t.data()) f64(v);
  }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void tensor_data(Tensor& t) {
    for (auto& v : t.data()) v = f64();
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > in_.size()) throw TruncatedError("checkpoint truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.str(serialize_config(ckpt.config));
  w.u64(ckpt.step);
  const ParamStore& store = ckpt.params.store;
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.str(store.name(i));
    w.u32(static_cast<std::uint32_t>(store.at(i).rows()));
    w.u32(static_cast<std::uint32_t>(store.at(i).cols()));
    w.tensor_data(store.at(i));
  }
  w.u64(ckpt.optimizer.step);
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.tensor_data(ckpt.optimizer.m.at(i));
    w.tensor_data(ckpt.optimizer.v.at(i));
  }
  const std::uint32_t crc = checksum(w.out());
  w.u32(crc);
  return std::move(w.out());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw BadMagicError("bad checkpoint magic (expected \"M3CK\")");
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.u32() != checksum(body)) throw DataError("checkpoint checksum mismatch");

  Reader r(body.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint version " + std::to_string(version) + " unsupported");
  }
  Checkpoint ck;
  ck.config = parse_config(r.str());
  ck.step = r.u64();
  ck.params = init_model(ck.config.dims, 0);
  ParamStore& store = ck.params.store;
  const std::uint32_t n = r.u32();
  if (n != store.size()) {
    throw DataError("checkpoint holds " + std::to_string(n) + " tensors, config implies " +
                    std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Tensor& t = store.at(i);
    if (name != store.name(i) || rows != t.rows() || cols != t.cols()) {
      throw DataError("checkpoint tensor '" + name + "' does not match model layout");
    }
    r.tensor_data(t);
  }
  ck.optimizer = make_optimizer_state(store, ck.config.adamw());
  ck.optimizer.step = r.u64();
  for (std::size_t i = 0; i < n; ++i) {
    r.tensor_data(ck.optimizer.m[i]);
    r.tensor_data(ck.optimizer.v[i]);
  }
  if (!r.done()) throw DataError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  return decode_checkpoint(bytes);
}

}  // namespace m3el
