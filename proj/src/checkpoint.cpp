// Copyright 2026 The ttfuse Authors. All Rights Reserved.
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

#include "ttfuse/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "ttfuse/error.hpp"

namespace ttfuse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kTruncated,
                  std::string("checkpoint truncated while reading ") + what);
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
           (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic),
                                std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const Shape& s = tensor.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
    const auto data = tensor.data();
    const auto* raw = reinterpret_cast<const std::uint8_t*>(data.data());
    out.insert(out.end(), raw, raw + data.size_bytes());
  }
  put_u32(out, crc32_of(out));
  return out;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw Error(ErrorKind::kBadMagic, "not a ttfuse checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kBadVersion,
                "unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = in.u32("tensor count");
  Checkpoint checkpoint;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = in.u32("name length");
    const auto name = in.take(name_len, "tensor name");
    std::uint32_t dims[4];
    for (auto& d : dims) d = in.u32("shape");
    std::uint64_t numel = 1;
    for (auto d : dims) {
      if (d == 0 || d > (1u << 20)) {
        throw Error(ErrorKind::kCorrupt, "checkpoint tensor with bad extent");
      }
      numel *= d;
    }
    if (numel > (std::uint64_t{1} << 28)) {
      throw Error(ErrorKind::kCorrupt, "checkpoint tensor too large");
    }
    const auto payload = in.take(numel * sizeof(double), "tensor payload");
    std::vector<double> values(numel);
    std::memcpy(values.data(), payload.data(), payload.size());
    checkpoint.tensors.push_back(
        {std::string(name.begin(), name.end()),
         Tensor(Shape{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                      static_cast<int>(dims[2]), static_cast<int>(dims[3])},
                std::move(values))});
  }
  const std::size_t body = in.pos();
  const std::uint32_t stored = in.u32("checksum");
  if (stored != crc32_of(bytes.first(body))) {
    throw Error(ErrorKind::kBadChecksum, "checkpoint CRC mismatch");
  }
  if (in.pos() != bytes.size()) {
    throw Error(ErrorKind::kCorrupt, "trailing bytes after checkpoint");
  }
  return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::kNotFound, "checkpoint not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  if (!in.eof() && in.fail()) {
    throw Error(ErrorKind::kIo, "cannot read checkpoint " + path.string());
  }
  return parse_checkpoint(bytes);
}

Checkpoint to_checkpoint(const FusionNetwork& net) {
  Checkpoint checkpoint;
  for (const Parameter* p : net.parameters()) {
    checkpoint.tensors.push_back({p->name(), Tensor(p->value().shape(),
                                                    std::vector<double>(
                                                        p->value().data().begin(),
                                                        p->value().data().end()))});
  }
  return checkpoint;
}

FusionNetwork network_from_checkpoint(const Checkpoint& checkpoint) {
  NetworkConfig config;
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : checkpoint.tensors) {
    if (!by_name.emplace(name, &tensor).second) {
      throw Error(ErrorKind::kCorrupt, "duplicate checkpoint tensor " + name);
    }
    if (name.rfind("encoder_b.", 0) == 0) config.shared_encoder = false;
    if (name.rfind("mapper.", 0) == 0) config.learned_mapper = true;
  }
  FusionNetwork net = FusionNetwork::create(config, 0);
  std::vector<Parameter*> params = net.parameters();
  if (params.size() != by_name.size()) {
    throw Error(ErrorKind::kCorrupt,
                "checkpoint holds " + std::to_string(by_name.size()) +
                    " tensors, the network expects " +
                    std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const auto it = by_name.find(p->name());
    if (it == by_name.end()) {
      throw Error(ErrorKind::kCorrupt, "checkpoint is missing " + p->name());
    }
    if (it->second->shape() != p->value().shape()) {
      throw Error(ErrorKind::kCorrupt,
                  "checkpoint tensor " + p->name() + " has shape " +
                      it->second->shape().str() + ", expected " +
                      p->value().shape().str());
    }
  }
  for (Parameter* p : params) {
    const Tensor& src = *by_name.at(p->name());
    std::copy(src.data().begin(), src.data().end(), p->mutable_value().data().begin());
  }
  return net;
}

}  // namespace ttfuse
