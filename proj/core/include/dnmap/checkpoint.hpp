#pragma once

#include "dnmap/neural_map.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dnmap {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

/// Payload sizes of the five sections, in file order.
enum class CheckpointSection : int { octree, indicators, components, continuous, decoder };

struct CheckpointHeader {
  std::uint32_t version = 0;
  ConfigEcho config;
  std::array<std::uint64_t, 5> section_bytes{};

  /// Value for `key`, or throws FormatError.
  const std::string& at(const std::string& key) const;
  std::uint64_t section(CheckpointSection s) const {
    return section_bytes[static_cast<std::size_t>(s)];
  }
};

/// Little-endian file: "DNMP", u32 version, a length-prefixed block of
/// length-prefixed UTF-8 key/value pairs, then the octree, indicator,
/// component, continuous and decoder sections, each prefixed by its u64
/// payload length. Floats are stored as f32.
///
/// Discrete corners are stored as hard codes: indicator bits packed
/// ceil(B/8) bytes per corner (bit j at byte j/8, position j%8), or the
/// argmax codebook index in indexing mode. Corner rows are written in
/// canonical slot order so a tree grown incrementally round-trips.
template <class T>
void save_checkpoint(const NeuralMap<T>& map, const std::filesystem::path& path,
                     const ConfigEcho& extra = {});

template <class T>
struct LoadedCheckpoint {
  CheckpointHeader header;
  NeuralMap<T> map;
};

/// Throws FormatError on bad magic, unsupported version or truncation.
template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

extern template void save_checkpoint<float>(const NeuralMap<float>&, const std::filesystem::path&,
                                            const ConfigEcho&);
extern template void save_checkpoint<double>(const NeuralMap<double>&, const std::filesystem::path&,
                                             const ConfigEcho&);
extern template LoadedCheckpoint<float> load_checkpoint<float>(const std::filesystem::path&);
extern template LoadedCheckpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace dnmap
