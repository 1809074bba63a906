#pragma once

// Binary checkpoints:
//   "XQSVCKPT" | u32 version | str config | u64 vocab hash | u32 |V| | str meta
//   | u32 tensor count | { u32 rows | u32 cols | f32[rows*cols] column-major }
//   | u64 FNV-1a of everything before it
// Integers and floats are little-endian; str is a u32 length plus bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "xqsv/movespace.hpp"
#include "xqsv/network.hpp"

namespace xqsv {

inline constexpr std::string_view kCheckpointMagic = "XQSVCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Descriptive metadata carried alongside the weights.
struct ModelMeta {
  EloBin bin = EloBin::unbounded();
  std::optional<double> accuracy;

  friend bool operator==(const ModelMeta&, const ModelMeta&) = default;

  std::string to_text() const {
    std::string out = "bin = " + bin.label() + "\n";
    if (accuracy) out += "accuracy = " + detail::number_text(*accuracy) + "\n";
    return out;
  }

  static ModelMeta parse(std::string_view text) {
    ModelMeta m;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      const auto line = detail::trim(text.substr(pos, end - pos));
      pos = end + 1;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = detail::trim(line.substr(0, eq));
      const auto value = detail::trim(line.substr(eq + 1));
      if (key == "bin") {
        m.bin = value == "all" ? EloBin::unbounded() : parse_bins(value).at(0);
      } else if (key == "accuracy") {
        m.accuracy = detail::parse_double(value);
      }
    }
    return m;
  }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline void put_str(std::string& out, std::string_view s) {
  put_le(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(T));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= U(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::string_view str() {
    const auto n = get<std::uint32_t>();
    return take(n);
  }

  std::string_view take(std::size_t n) {
    need(n);
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::FormatError, "truncated checkpoint");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename S>
std::string save_checkpoint(const Network<S>& net, const ModelMeta& meta = {},
                            const MoveVocabulary& vocab = standard_vocabulary()) {
  if (static_cast<std::size_t>(net.vocab_size()) != vocab.size()) {
    throw Error(ErrorCode::VocabularyMismatch, "model and vocabulary sizes differ");
  }
  std::string out(kCheckpointMagic);
  detail::put_le(out, kCheckpointVersion);
  detail::put_str(out, net.config().to_text());
  detail::put_le(out, vocab.hash());
  detail::put_le(out, static_cast<std::uint32_t>(vocab.size()));
  detail::put_str(out, meta.to_text());
  detail::put_le(out, static_cast<std::uint32_t>(net.tensor_count()));
  for (std::size_t t = 0; t < net.tensor_count(); ++t) {
    const auto& m = net.tensor(t);
    detail::put_le(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_le(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_le(out, static_cast<float>(m.data()[i]));
  }
  detail::put_le(out, detail::fnv1a(out));
  return out;
}

struct LoadedModel {
  Network<float> net;
  ModelMeta meta;
};

inline LoadedModel load_checkpoint(std::string_view bytes, const MoveVocabulary& vocab = standard_vocabulary()) {
  if (bytes.size() < kCheckpointMagic.size() + 8 || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorCode::FormatError, "not a checkpoint");
  }
  detail::Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.get<std::uint64_t>() != detail::fnv1a(bytes.substr(0, bytes.size() - 8))) {
    throw Error(ErrorCode::ChecksumMismatch, "checkpoint checksum mismatch");
  }
  detail::Reader in(bytes.substr(0, bytes.size() - 8));
  in.take(kCheckpointMagic.size());
  if (const auto v = in.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw Error(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(v));
  }
  const auto config = StructureConfig::parse(in.str());
  const auto hash = in.get<std::uint64_t>();
  const auto size = in.get<std::uint32_t>();
  if (hash != vocab.hash() || size != vocab.size()) {
    throw Error(ErrorCode::VocabularyMismatch, "checkpoint was trained on a different vocabulary");
  }
  LoadedModel out{Network<float>(config, static_cast<int>(size), 0, true), ModelMeta::parse(in.str())};
  const auto count = in.get<std::uint32_t>();
  if (count != out.net.tensor_count()) throw Error(ErrorCode::FormatError, "tensor count does not match config");
  for (std::size_t t = 0; t < count; ++t) {
    auto& m = out.net.tensor(t);
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (rows != m.rows() || cols != m.cols()) {
      throw Error(ErrorCode::FormatError, "shape mismatch for " + out.net.info(t).name);
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.get<float>();
  }
  if (!in.done()) throw Error(ErrorCode::FormatError, "trailing bytes in checkpoint");
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace xqsv
