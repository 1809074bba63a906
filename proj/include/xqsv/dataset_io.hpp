#pragma once

// Dataset directory:
//   vocabulary.txt            token per line, line number = index
//   games.txt                 the games in record format, in ordinal order
//   manifest.json             seed, memory, bins, ratios, per-game split, counts
//   samples/<bin>.<part>.bin  "XQSM" | u32 version | u64 count |
//                             { u32 game | u32 ply | i32 elo | u16 y | u16 n | u16 x[n] }
// All integers little-endian.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "xqsv/checkpoint.hpp"
#include "xqsv/dataset.hpp"
#include "xqsv/notation.hpp"

namespace xqsv {

inline constexpr std::string_view kSampleMagic = "XQSM";
inline constexpr std::uint32_t kSampleVersion = 1;

inline std::string encode_samples(std::span<const TrainingSample> samples) {
  auto put16 = [](std::string& out, std::uint32_t v) {
    if (v > 0xFFFF) throw Error(ErrorCode::FormatError, "value does not fit in 16 bits");
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
  };
  std::string out(kSampleMagic);
  detail::put_le(out, kSampleVersion);
  detail::put_le(out, static_cast<std::uint64_t>(samples.size()));
  for (const auto& s : samples) {
    detail::put_le(out, s.game);
    detail::put_le(out, s.ply);
    detail::put_le(out, static_cast<std::int32_t>(s.mover_elo));
    put16(out, static_cast<std::uint32_t>(s.y));
    put16(out, static_cast<std::uint32_t>(s.x.size()));
    for (int v : s.x) put16(out, static_cast<std::uint32_t>(v));
  }
  return out;
}

inline std::vector<TrainingSample> decode_samples(std::string_view bytes) {
  detail::Reader in(bytes);
  if (in.take(kSampleMagic.size()) != kSampleMagic) throw Error(ErrorCode::FormatError, "not a sample file");
  if (in.get<std::uint32_t>() != kSampleVersion) throw Error(ErrorCode::FormatError, "unsupported sample file version");
  auto get16 = [&in] {
    const auto b = in.take(2);
    return static_cast<int>(static_cast<unsigned char>(b[0]) | (static_cast<unsigned char>(b[1]) << 8));
  };
  const auto count = in.get<std::uint64_t>();
  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    TrainingSample s;
    s.game = in.get<std::uint32_t>();
    s.ply = in.get<std::uint32_t>();
    s.mover_elo = in.get<std::int32_t>();
    s.y = get16();
    s.x.resize(static_cast<std::size_t>(get16()));
    for (auto& v : s.x) v = get16();
    out.push_back(std::move(s));
  }
  if (!in.done()) throw Error(ErrorCode::FormatError, "trailing bytes in sample file");
  return out;
}

struct PrepareOptions {
  std::vector<EloBin> bins = standard_bins();
  MemoryCapacity memory = 5;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  BinPolicy policy = BinPolicy::PerMover;
};

/// A prepared dataset: the games, their split assignment and per-bin samples.
struct Dataset {
  std::vector<GameRecord> records;
  std::vector<EncodedGame> games;
  std::vector<std::uint8_t> assignment;
  PrepareOptions options;
  std::map<EloBin, DatasetSplit> splits;

  /// Re-windows one bin under another memory capacity.
  DatasetSplit window(const EloBin& bin, MemoryCapacity m) const {
    return make_split(games, assignment, m, bin, options.seed, options.policy);
  }

  const DatasetSplit& split(const EloBin& bin) const {
    const auto it = splits.find(bin);
    if (it == splits.end()) throw Error(ErrorCode::InvalidConfig, "bin " + bin.label() + " is not in the dataset");
    return it->second;
  }
};

inline Dataset prepare_dataset(std::vector<GameRecord> records, const PrepareOptions& opts) {
  Dataset d;
  d.options = opts;
  d.records = std::move(records);
  for (const auto& r : d.records) d.games.push_back(encode_game(r));
  d.assignment = assign_games(d.games.size(), opts.ratios, opts.seed);
  for (const auto& bin : opts.bins) d.splits[bin] = d.window(bin, opts.memory);
  return d;
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "samples");
  write_file((dir / "vocabulary.txt").string(), standard_vocabulary().manifest());
  write_file((dir / "games.txt").string(), serialize_records(d.records));
  nlohmann::json bins = nlohmann::json::array();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [bin, split] : d.splits) {
    bins.push_back(bin.label());
    counts[bin.label()] = {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}};
    const std::pair<const char*, const std::vector<TrainingSample>*> parts[] = {
        {"train", &split.train}, {"validation", &split.validation}, {"test", &split.test}};
    for (const auto& [name, samples] : parts) {
      write_file((dir / "samples" / (bin.label() + "." + name + ".bin")).string(), encode_samples(*samples));
    }
  }
  const nlohmann::json manifest = {
      {"seed", d.options.seed},
      {"memory", memory_text(d.options.memory)},
      {"bins", bins},
      {"ratios", {d.options.ratios.train, d.options.ratios.validation, d.options.ratios.test}},
      {"bin_policy", d.options.policy == BinPolicy::PerMover ? "per_mover" : "game_average"},
      {"vocabulary_size", standard_vocabulary().size()},
      {"vocabulary_hash", standard_vocabulary().hash()},
      {"games", d.games.size()},
      {"assignment", d.assignment},
      {"counts", counts}};
  write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  if (read_file((dir / "vocabulary.txt").string()) != standard_vocabulary().manifest()) {
    throw Error(ErrorCode::VocabularyMismatch, "dataset was built with a different vocabulary");
  }
  const auto manifest = nlohmann::json::parse(read_file((dir / "manifest.json").string()));
  Dataset d;
  d.options.seed = manifest.at("seed").get<std::uint64_t>();
  d.options.memory = parse_memory(manifest.at("memory").get<std::string>());
  const auto ratios = manifest.at("ratios").get<std::vector<double>>();
  d.options.ratios = {ratios.at(0), ratios.at(1), ratios.at(2)};
  d.options.policy = manifest.at("bin_policy") == "per_mover" ? BinPolicy::PerMover : BinPolicy::GameAverage;
  d.options.bins.clear();
  for (const auto& b : manifest.at("bins")) d.options.bins.push_back(parse_bins(b.get<std::string>()).at(0));
  auto parsed = parse_record_file(read_file((dir / "games.txt").string()));
  if (!parsed.diagnostics.empty()) throw Error(ErrorCode::FormatError, "games.txt contains invalid games");
  d.records = std::move(parsed.file.records);
  for (const auto& r : d.records) d.games.push_back(encode_game(r));
  d.assignment = manifest.at("assignment").get<std::vector<std::uint8_t>>();
  if (d.assignment.size() != d.games.size()) throw Error(ErrorCode::FormatError, "assignment does not match games");
  for (const auto& bin : d.options.bins) {
    DatasetSplit s;
    s.seed = d.options.seed;
    s.train = decode_samples(read_file((dir / "samples" / (bin.label() + ".train.bin")).string()));
    s.validation = decode_samples(read_file((dir / "samples" / (bin.label() + ".validation.bin")).string()));
    s.test = decode_samples(read_file((dir / "samples" / (bin.label() + ".test.bin")).string()));
    d.splits[bin] = std::move(s);
  }
  return d;
}

}  // namespace xqsv
