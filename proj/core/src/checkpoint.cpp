#include "dnmap/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dnmap {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'N', 'M', 'P'};

class Writer {
 public:
  template <class V>
  void pod(const V& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(V));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size, std::string what) : p_(data), end_(data + size), what_(std::move(what)) {}

  template <class V>
  V pod() {
    V v;
    need(sizeof(V));
    std::memcpy(&v, p_, sizeof(V));
    p_ += sizeof(V);
    return v;
  }
  const char* take(std::size_t n) {
    need(n);
    const char* q = p_;
    p_ += n;
    return q;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    const char* q = take(n);
    return std::string(q, n);
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("checkpoint '" + what_ + "' is truncated");
  }
  const char* p_;
  const char* end_;
  std::string what_;
};

std::string num(double v) { return fmt::format("{}", v); }

double parse_double(const std::string& s, const std::string& key) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("checkpoint config '" + key + "' is not a number: '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("checkpoint config '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("checkpoint config '" + key + "' is not an unsigned integer: '" + s + "'");
  }
  return v;
}

ConfigEcho map_echo(const MapConfig& c, const StorageReport& storage) {
  return {
      {"map.mode", std::string(to_string(c.mode))},
      {"map.dim", std::to_string(c.dim)},
      {"map.bitwidth", std::to_string(c.bitwidth)},
      {"map.hidden", std::to_string(c.hidden)},
      {"map.seed", std::to_string(c.seed)},
      {"octree.levels", std::to_string(c.octree.levels)},
      {"octree.leaf_voxel_size", num(c.octree.leaf_voxel_size)},
      {"octree.origin_x", num(c.octree.origin.x())},
      {"octree.origin_y", num(c.octree.origin.y())},
      {"octree.origin_z", num(c.octree.origin.z())},
      {"storage.rep_bytes", std::to_string(storage.rep_bytes())},
      {"storage.total_bytes", std::to_string(storage.total_bytes())},
  };
}

MapConfig map_config_from(const CheckpointHeader& h) {
  MapConfig c;
  try {
    c.mode = parse_feature_mode(h.at("map.mode"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  c.dim = static_cast<int>(parse_int(h.at("map.dim"), "map.dim"));
  c.bitwidth = static_cast<int>(parse_int(h.at("map.bitwidth"), "map.bitwidth"));
  c.hidden = static_cast<int>(parse_int(h.at("map.hidden"), "map.hidden"));
  c.seed = parse_uint(h.at("map.seed"), "map.seed");
  c.octree.levels = static_cast<int>(parse_int(h.at("octree.levels"), "octree.levels"));
  c.octree.leaf_voxel_size = parse_double(h.at("octree.leaf_voxel_size"), "octree.leaf_voxel_size");
  c.octree.origin = Vec3(parse_double(h.at("octree.origin_x"), "octree.origin_x"),
                         parse_double(h.at("octree.origin_y"), "octree.origin_y"),
                         parse_double(h.at("octree.origin_z"), "octree.origin_z"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: invalid map configuration: ") + e.what());
  }
  return c;
}

template <class T>
void put_floats(Writer& w, std::span<const T> v) {
  for (T x : v) w.pod(static_cast<float>(x));
}

struct ParsedFile {
  CheckpointHeader header;
  std::array<std::pair<const char*, std::size_t>, 5> sections{};
  std::vector<char> data;
};

ParsedFile parse_file(const fs::path& path) {
  ParsedFile f;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
  f.data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  Reader r(f.data.data(), f.data.size(), path.string());
  if (f.data.size() < 4 || std::memcmp(r.take(4), kMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "' is not a dnmap checkpoint (bad magic)");
  }
  f.header.version = r.pod<std::uint32_t>();
  if (f.header.version != kCheckpointVersion) {
    throw FormatError(fmt::format("checkpoint '{}' has version {}, expected {}", path.string(),
                                  f.header.version, kCheckpointVersion));
  }
  const auto block_len = r.pod<std::uint64_t>();
  Reader block(r.take(block_len), block_len, path.string());
  const auto pairs = block.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < pairs; ++i) {
    std::string k = block.str();
    std::string v = block.str();
    f.header.config.emplace_back(std::move(k), std::move(v));
  }
  for (std::size_t s = 0; s < 5; ++s) {
    const auto n = r.pod<std::uint64_t>();
    f.sections[s] = {r.take(n), n};
    f.header.section_bytes[s] = n;
  }
  if (r.remaining() != 0) throw FormatError("checkpoint '" + path.string() + "' has trailing bytes");
  return f;
}

}  // namespace

const std::string& CheckpointHeader::at(const std::string& key) const {
  for (const auto& [k, v] : config) {
    if (k == key) return v;
  }
  throw FormatError("checkpoint config is missing key '" + key + "'");
}

template <class T>
void save_checkpoint(const NeuralMap<T>& map, const fs::path& path, const ConfigEcho& extra) {
  const MapConfig& cfg = map.config();
  const SparseOctree& tree = map.tree();
  const FeatureField<T>& ff = map.features();
  const int L = tree.levels();
  const auto D = static_cast<std::size_t>(cfg.dim);
  const int B = cfg.bitwidth;
  const std::size_t code_bytes = static_cast<std::size_t>(packed_code_bytes(B));

  std::vector<std::vector<std::uint64_t>> codes(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto v = tree.voxel_codes(l);
    codes[static_cast<std::size_t>(l)].assign(v.begin(), v.end());
  }
  const SparseOctree canonical = SparseOctree::from_voxel_codes(cfg.octree, codes);
  // order[l][k] = slot in `tree` of the corner with canonical slot k.
  std::vector<std::vector<std::uint32_t>> order(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    for (std::uint64_t code : canonical.corner_codes_in_slot_order(l)) {
      const auto slot = tree.corner_slot(l, code);
      if (!slot) throw std::logic_error("checkpoint: corner missing from source tree");
      order[static_cast<std::size_t>(l)].push_back(*slot);
    }
  }

  std::array<Writer, 5> sec;
  {
    Writer& w = sec[0];
    w.pod(static_cast<std::uint32_t>(L));
    w.pod(cfg.octree.leaf_voxel_size);
    w.pod(cfg.octree.origin.x());
    w.pod(cfg.octree.origin.y());
    w.pod(cfg.octree.origin.z());
    for (const auto& c : codes) {
      w.pod(static_cast<std::uint64_t>(c.size()));
      w.bytes(c.data(), c.size() * sizeof(std::uint64_t));
    }
  }
  std::vector<std::uint8_t> packed(code_bytes);
  std::vector<T> bits(static_cast<std::size_t>(B));
  for (int l = 0; l < L; ++l) {
    if (cfg.mode == FeatureMode::continuous) break;
    for (std::uint32_t slot : order[static_cast<std::size_t>(l)]) {
      std::fill(packed.begin(), packed.end(), std::uint8_t{0});
      if (cfg.mode == FeatureMode::indexing) {
        std::uint32_t idx = ff.corner_index(l, slot);
        for (std::size_t b = 0; b < code_bytes; ++b) packed[b] = static_cast<std::uint8_t>(idx >> (8 * b));
      } else {
        ff.corner_bits(l, slot, bits);
        for (int j = 0; j < B; ++j) {
          if (bits[static_cast<std::size_t>(j)] > T(0.5)) {
            packed[static_cast<std::size_t>(j / 8)] |= static_cast<std::uint8_t>(1u << (j % 8));
          }
        }
      }
      sec[1].bytes(packed.data(), packed.size());
    }
  }
  if (cfg.mode == FeatureMode::indexing) {
    put_floats<T>(sec[2], ff.codebook().value);
  } else if (cfg.mode != FeatureMode::continuous) {
    put_floats<T>(sec[2], ff.components().value);
  }
  auto put_rows = [&](const Parameter<T>& p, int l) {
    for (std::uint32_t slot : order[static_cast<std::size_t>(l)]) {
      put_floats<T>(sec[3], std::span<const T>(p.value.data() + slot * D, D));
    }
  };
  if (cfg.mode == FeatureMode::continuous) {
    for (int l = 0; l < L; ++l) put_rows(ff.embeddings(l), l);
  } else if (cfg.mode == FeatureMode::decomposition) {
    put_rows(ff.continuous(), 0);
  }
  put_floats<T>(sec[4], map.decoder().params().value);

  ConfigEcho echo = map_echo(cfg, map.storage());
  echo.insert(echo.end(), extra.begin(), extra.end());
  Writer block;
  block.pod(static_cast<std::uint32_t>(echo.size()));
  for (const auto& [k, v] : echo) {
    block.str(k);
    block.str(v);
  }

  Writer file;
  file.bytes(kMagic, 4);
  file.pod(kCheckpointVersion);
  file.pod(static_cast<std::uint64_t>(block.buffer().size()));
  file.bytes(block.buffer().data(), block.buffer().size());
  for (auto& s : sec) {
    file.pod(static_cast<std::uint64_t>(s.buffer().size()));
    file.bytes(s.buffer().data(), s.buffer().size());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out.write(file.buffer().data(), static_cast<std::streamsize>(file.buffer().size()));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

CheckpointHeader read_checkpoint_header(const fs::path& path) { return parse_file(path).header; }

template <class T>
LoadedCheckpoint<T> load_checkpoint(const fs::path& path) {
  ParsedFile f = parse_file(path);
  const MapConfig cfg = map_config_from(f.header);
  const auto D = static_cast<std::size_t>(cfg.dim);
  const int B = cfg.bitwidth;
  const std::size_t code_bytes = static_cast<std::size_t>(packed_code_bytes(B));
  const std::string what = path.string();

  Reader oct(f.sections[0].first, f.sections[0].second, what);
  const auto L = oct.pod<std::uint32_t>();
  OctreeConfig oc = cfg.octree;
  oc.leaf_voxel_size = oct.pod<double>();
  const double ox = oct.pod<double>(), oy = oct.pod<double>(), oz = oct.pod<double>();
  oc.origin = Vec3(ox, oy, oz);
  if (static_cast<int>(L) != cfg.octree.levels) throw FormatError("checkpoint octree height mismatch");
  std::vector<std::vector<std::uint64_t>> codes(L);
  for (auto& c : codes) {
    const auto n = oct.pod<std::uint64_t>();
    const char* p = oct.take(n * sizeof(std::uint64_t));
    c.resize(n);
    std::memcpy(c.data(), p, n * sizeof(std::uint64_t));
  }
  SparseOctree tree;
  try {
    tree = SparseOctree::from_voxel_codes(oc, codes);
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint octree section is invalid: ") + e.what());
  }
  tree.finalize();
  MapConfig mc = cfg;
  mc.octree = oc;
  LoadedCheckpoint<T> out{f.header, NeuralMap<T>(mc, std::move(tree))};
  NeuralMap<T>& map = out.map;
  FeatureField<T>& ff = map.features();

  auto read_floats = [&](Reader& r, Parameter<T>& p, std::size_t offset, std::size_t n) {
    const char* q = r.take(n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, q + i * sizeof(float), sizeof(float));
      p.value[offset + i] = static_cast<T>(v);
    }
    ++p.version;
  };
  auto expect_end = [&](const Reader& r, const char* name) {
    if (r.remaining() != 0) throw FormatError(fmt::format("checkpoint {} section has the wrong size", name));
  };

  Reader ind(f.sections[1].first, f.sections[1].second, what);
  if (cfg.mode != FeatureMode::continuous) {
    for (int l = 0; l < map.tree().levels(); ++l) {
      const std::size_t n = map.tree().corner_count(l);
      if (cfg.mode == FeatureMode::indexing) {
        Parameter<T>& lg = ff.logits(l);
        const std::size_t K = ff.codebook_size();
        std::fill(lg.value.begin(), lg.value.end(), T(0));
        for (std::size_t s = 0; s < n; ++s) {
          const char* q = ind.take(code_bytes);
          std::uint32_t idx = 0;
          for (std::size_t b = 0; b < code_bytes; ++b) {
            idx |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(q[b])) << (8 * b);
          }
          if (idx >= K) throw FormatError("checkpoint codebook index out of range");
          lg.value[s * K + idx] = T(1);
        }
        ++lg.version;
      } else {
        Parameter<T>& v = ff.indicators(l);
        const auto Bs = static_cast<std::size_t>(B);
        for (std::size_t s = 0; s < n; ++s) {
          const char* q = ind.take(code_bytes);
          for (std::size_t j = 0; j < Bs; ++j) {
            const bool set = (static_cast<std::uint8_t>(q[j / 8]) >> (j % 8)) & 1u;
            v.value[s * Bs + j] = set ? T(1) : T(-1);
          }
        }
        ++v.version;
      }
    }
  }
  expect_end(ind, "indicator");

  Reader comp(f.sections[2].first, f.sections[2].second, what);
  if (cfg.mode == FeatureMode::indexing) {
    read_floats(comp, ff.codebook(), 0, ff.codebook().size());
  } else if (cfg.mode != FeatureMode::continuous) {
    read_floats(comp, ff.components(), 0, ff.components().size());
  }
  expect_end(comp, "component");

  Reader cont(f.sections[3].first, f.sections[3].second, what);
  if (cfg.mode == FeatureMode::continuous) {
    for (int l = 0; l < map.tree().levels(); ++l) {
      read_floats(cont, ff.embeddings(l), 0, map.tree().corner_count(l) * D);
    }
  } else if (cfg.mode == FeatureMode::decomposition) {
    read_floats(cont, ff.continuous(), 0, map.tree().corner_count(0) * D);
  }
  expect_end(cont, "continuous");

  Reader dec(f.sections[4].first, f.sections[4].second, what);
  read_floats(dec, map.decoder().params(), 0, map.decoder().parameter_count());
  expect_end(dec, "decoder");
  return out;
}

template void save_checkpoint<float>(const NeuralMap<float>&, const fs::path&, const ConfigEcho&);
template void save_checkpoint<double>(const NeuralMap<double>&, const fs::path&, const ConfigEcho&);
template LoadedCheckpoint<float> load_checkpoint<float>(const fs::path&);
template LoadedCheckpoint<double> load_checkpoint<double>(const fs::path&);

}  // namespace dnmap
