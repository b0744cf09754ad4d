#include "starpose/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'S', 'E'};

std::uint64_t fnv1a(const unsigned char* bytes, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  const unsigned char* raw(std::size_t n) {
    need(n);
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  unsigned char byte() { return static_cast<unsigned char>(buf_[pos_++]); }
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw DataError("checkpoint truncated at byte " + std::to_string(pos_) + ": " + path_);
    }
  }
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamTable& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u64(out, static_cast<std::uint64_t>(d));
    const std::size_t payload_start = out.size();
    for (double v : t.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    const auto* payload = reinterpret_cast<const unsigned char*>(out.data() + payload_start);
    put_u64(out, fnv1a(payload, t.data.size() * 8));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write checkpoint: " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("checkpoint write failed: " + path);
}

ParamTable load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  Reader r(buf, path);
  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }
  const std::uint32_t count = r.u32();
  ParamTable tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    std::vector<std::int64_t> dims(rank);
    std::int64_t total = 1;
    for (auto& d : dims) {
      d = static_cast<std::int64_t>(r.u64());
      total *= d;
    }
    if (total < 0) throw DataError("checkpoint tensor " + name + " has invalid dims");
    const unsigned char* payload = r.raw(static_cast<std::size_t>(total) * 8);
    const std::uint64_t expected = fnv1a(payload, static_cast<std::size_t>(total) * 8);
    Tensor t(dims);
    for (std::int64_t k = 0; k < total; ++k) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(payload[k * 8 + b]) << (8 * b);
      }
      t[k] = std::bit_cast<double>(bits);
    }
    const std::uint64_t stored = r.u64();
    if (stored != expected) {
      throw DataError("checksum mismatch for tensor " + name + ": " + path);
    }
    tensors.emplace(name, std::move(t));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint table: " + path);
  return tensors;
}

}  // namespace starpose
