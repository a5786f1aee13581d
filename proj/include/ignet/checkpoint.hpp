#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ignet/model.hpp"
#include "ignet/tensor.hpp"

namespace ignet {

// Serialized training snapshot. The container is binary little-endian:
//   magic "IGNT", format version u32,
//   length-prefixed (u32) UTF-8 structured text (config echo + run state),
//   entry count u64, then per entry:
//     name length u16, name bytes, dtype u8 (0 = f32), ndim u8,
//     dims u64 each, raw element bytes.
// Entries carry parameters by name, BN stats as <block>.bn_mean/.bn_var and
// Adam moments as adam.m.<name> / adam.v.<name>, sorted by name.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;   // completed epochs
  std::int64_t adam_t = 0;  // completed optimizer steps
  bool bn_initialized = false;
  std::map<std::string, TensorF> entries;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(byte() | (byte() << 8)); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  std::uint32_t byte() {
    need(1);
    return static_cast<unsigned char>(data_[pos_++]);
  }
  void need(std::size_t n) {
    if (pos_ + n > data_.size())
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "truncated checkpoint container '" + path_ + "'");
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::string checkpoint_meta_text(const Checkpoint& c) {
  std::ostringstream os;
  os << "channels=" << c.config.channels << "\n"
     << "stages=" << c.config.stages << "\n"
     << "fe_blocks=" << c.config.fe_blocks << "\n"
     << "dec_blocks=" << c.config.dec_blocks << "\n"
     << "kernel=" << c.config.kernel << "\n"
     << "variant=" << guidance_name(c.config.guidance) << "\n"
     << "seed=" << c.seed << "\n"
     << "epoch=" << c.epoch << "\n"
     << "adam_t=" << c.adam_t << "\n"
     << "bn_initialized=" << (c.bn_initialized ? 1 : 0) << "\n";
  return os.str();
}

inline void parse_meta_text(const std::string& text, Checkpoint& c, const std::string& path) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError(CheckpointError::Kind::Malformed,
                            "bad meta line '" + line + "' in '" + path + "'");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "channels") c.config.channels = std::stoi(val);
      else if (key == "stages") c.config.stages = std::stoi(val);
      else if (key == "fe_blocks") c.config.fe_blocks = std::stoi(val);
      else if (key == "dec_blocks") c.config.dec_blocks = std::stoi(val);
      else if (key == "kernel") c.config.kernel = std::stoi(val);
      else if (key == "variant") c.config.guidance = guidance_from_name(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else if (key == "epoch") c.epoch = std::stoll(val);
      else if (key == "adam_t") c.adam_t = std::stoll(val);
      else if (key == "bn_initialized") c.bn_initialized = (val == "1");
      else
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "unknown meta key '" + key + "' in '" + path + "'");
    } catch (const CheckpointError&) {
      throw;
    } catch (const std::exception&) {
      throw CheckpointError(CheckpointError::Kind::Malformed,
                            "bad meta value for '" + key + "' in '" + path + "'");
    }
  }
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::string out;
  out += "IGNT";
  detail::put_u32(out, Checkpoint::kVersion);
  const std::string meta = detail::checkpoint_meta_text(c);
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  detail::put_u64(out, c.entries.size());
  for (const auto& [name, tensor] : c.entries) {
    if (name.size() > 0xffff) throw ValueError("checkpoint entry name too long");
    detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(0);  // dtype f32
    out.push_back(static_cast<char>(tensor.ndim()));
    for (int d = 0; d < tensor.ndim(); ++d)
      detail::put_u64(out, static_cast<std::uint64_t>(tensor.dim(d)));
    const std::size_t nbytes = static_cast<std::size_t>(tensor.numel()) * sizeof(float);
    const std::size_t at = out.size();
    out.resize(at + nbytes);
    std::memcpy(out.data() + at, tensor.data(), nbytes);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string data = ss.str();

  detail::ByteReader r(data, path);
  if (r.bytes(4) != "IGNT")
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          "'" + path + "' is not an IGNT checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    throw CheckpointError(CheckpointError::Kind::BadVersion,
                          "unsupported checkpoint version " + std::to_string(version) +
                              " in '" + path + "' (expected " +
                              std::to_string(Checkpoint::kVersion) + ")");
  Checkpoint c;
  detail::parse_meta_text(r.bytes(r.u32()), c, path);
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.u16());
    const std::uint8_t dtype = static_cast<std::uint8_t>(r.bytes(1)[0]);
    if (dtype != 0)
      throw CheckpointError(CheckpointError::Kind::Malformed,
                            "unknown dtype code " + std::to_string(dtype) + " for entry '" +
                                name + "' in '" + path + "'");
    const std::uint8_t ndim = static_cast<std::uint8_t>(r.bytes(1)[0]);
    Shape shape(ndim);
    for (int d = 0; d < ndim; ++d) shape[static_cast<std::size_t>(d)] =
        static_cast<index_t>(r.u64());
    TensorF t(shape);
    r.raw(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(float));
    c.entries.emplace(name, std::move(t));
  }
  if (!r.exhausted())
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          "trailing bytes after last entry in '" + path + "'");
  return c;
}

}  // namespace ignet
