#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dnmap::cli {
namespace pt = boost::property_tree;

namespace {

template <class V>
V parse_number(const std::string& s, const std::string& key) {
  V v{};
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw ConfigError(fmt::format("{}: invalid value '{}'", key, s));
  return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(fmt::format("{}: invalid boolean '{}'", key, s));
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"octree",
       {
           {"levels", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.octree.levels = parse_number<int>(v, k); }},
           {"leaf_voxel_size", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.octree.leaf_voxel_size = parse_number<double>(v, k); }},
           {"origin_x", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.octree.origin.x() = parse_number<double>(v, k); }},
           {"origin_y", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.octree.origin.y() = parse_number<double>(v, k); }},
           {"origin_z", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.octree.origin.z() = parse_number<double>(v, k); }},
       }},
      {"embedding",
       {
           {"dim", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.dim = parse_number<int>(v, k); }},
           {"bitwidth", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.bitwidth = parse_number<int>(v, k); }},
           {"mode", [](RunConfig& c, const std::string& v, const std::string& k) {
              try {
                c.map.mode = parse_feature_mode(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(fmt::format("{}: {}", k, e.what()));
              }
            }},
           {"path", [](RunConfig& c, const std::string& v, const std::string& k) {
              try {
                c.train.path = parse_query_path(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(fmt::format("{}: {}", k, e.what()));
              }
            }},
           {"hidden", [](RunConfig& c, const std::string& v, const std::string& k) { c.map.hidden = parse_number<int>(v, k); }},
       }},
      {"sampling",
       {
           {"free_samples", [](RunConfig& c, const std::string& v, const std::string& k) { c.sampling.free_samples = parse_number<int>(v, k); }},
           {"surface_samples", [](RunConfig& c, const std::string& v, const std::string& k) { c.sampling.surface_samples = parse_number<int>(v, k); }},
           {"sigma", [](RunConfig& c, const std::string& v, const std::string& k) {
              c.sampling.sigma = parse_number<double>(v, k);
              c.train.loss.sigma = c.sampling.sigma;
            }},
       }},
      {"train",
       {
           {"iterations", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.iterations = parse_number<std::int64_t>(v, k); }},
           {"batch_size", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.batch_size = parse_number<std::size_t>(v, k); }},
           {"lr", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.adam.lr = parse_number<double>(v, k); }},
           {"lr_decayed", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.adam.lr_decayed = parse_number<double>(v, k); }},
           {"lr_decay_step", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.adam.decay_step = parse_number<std::int64_t>(v, k); }},
           {"lambda", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.loss.lambda = parse_number<double>(v, k); }},
           {"eikonal_step", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.loss.eikonal_step = parse_number<double>(v, k); }},
           {"seed", [](RunConfig& c, const std::string& v, const std::string& k) {
              c.train.seed = parse_number<std::uint64_t>(v, k);
              c.map.seed = c.train.seed;
            }},
           {"threads", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.threads = parse_number<int>(v, k); }},
           {"incremental", [](RunConfig& c, const std::string& v, const std::string& k) { c.incremental = parse_bool(v, k); }},
           {"replay_capacity", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.replay_capacity = parse_number<std::size_t>(v, k); }},
           {"replay_old_fraction", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.replay_old_fraction = parse_number<double>(v, k); }},
           {"iterations_per_scan", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.iterations_per_scan = parse_number<std::int64_t>(v, k); }},
       }},
      {"mesh",
       {
           {"cell", [](RunConfig& c, const std::string& v, const std::string& k) { c.mesh.cell = parse_number<double>(v, k); }},
       }},
      {"eval",
       {
           {"threshold_cm", [](RunConfig& c, const std::string& v, const std::string& k) { c.eval.threshold_cm = parse_number<double>(v, k); }},
           {"samples", [](RunConfig& c, const std::string& v, const std::string& k) { c.eval.samples = parse_number<std::size_t>(v, k); }},
           {"every", [](RunConfig& c, const std::string& v, const std::string& k) { c.eval.every = parse_number<std::int64_t>(v, k); }},
       }},
  };
  return s;
}

}  // namespace

RunConfig::RunConfig() {
  map.bitwidth = 8;
  train.loss.sigma = sampling.sigma;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }
  RunConfig c;
  const auto& sch = schema();
  for (const auto& [section, body] : tree) {
    auto sit = sch.find(section);
    if (sit == sch.end()) throw ConfigError(fmt::format("{}: unknown section [{}]", source, section));
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(fmt::format("{}: key '{}' outside of any section", source, section));
    }
    for (const auto& [key, value] : body) {
      auto kit = sit->second.find(key);
      const std::string full = section + "." + key;
      if (kit == sit->second.end()) throw ConfigError(fmt::format("{}: unknown key '{}'", source, full));
      kit->second(c, value.get_value<std::string>(), full);
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::validate() const {
  try {
    map.validate();
    sampling.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(mesh.cell > 0)) throw ConfigError("mesh.cell must be positive");
  if (!(eval.threshold_cm > 0)) throw ConfigError("eval.threshold_cm must be positive");
  if (eval.samples == 0) throw ConfigError("eval.samples must be positive");
  if (eval.every <= 0) throw ConfigError("eval.every must be positive");
}

ConfigEcho RunConfig::echo() const {
  auto d = [](double v) { return fmt::format("{}", v); };
  return {
      {"octree.levels", std::to_string(map.octree.levels)},
      {"octree.leaf_voxel_size", d(map.octree.leaf_voxel_size)},
      {"octree.origin_x", d(map.octree.origin.x())},
      {"octree.origin_y", d(map.octree.origin.y())},
      {"octree.origin_z", d(map.octree.origin.z())},
      {"embedding.dim", std::to_string(map.dim)},
      {"embedding.bitwidth", std::to_string(map.bitwidth)},
      {"embedding.mode", std::string(to_string(map.mode))},
      {"embedding.path", std::string(to_string(train.path))},
      {"embedding.hidden", std::to_string(map.hidden)},
      {"sampling.free_samples", std::to_string(sampling.free_samples)},
      {"sampling.surface_samples", std::to_string(sampling.surface_samples)},
      {"sampling.sigma", d(sampling.sigma)},
      {"train.iterations", std::to_string(train.iterations)},
      {"train.batch_size", std::to_string(train.batch_size)},
      {"train.lr", d(train.adam.lr)},
      {"train.lr_decayed", d(train.adam.lr_decayed)},
      {"train.lr_decay_step", std::to_string(train.adam.decay_step)},
      {"train.lambda", d(train.loss.lambda)},
      {"train.eikonal_step", d(train.loss.eikonal_step)},
      {"train.seed", std::to_string(train.seed)},
      {"train.threads", std::to_string(train.threads)},
      {"train.incremental", incremental ? "true" : "false"},
      {"train.replay_capacity", std::to_string(train.replay_capacity)},
      {"train.replay_old_fraction", d(train.replay_old_fraction)},
      {"train.iterations_per_scan", std::to_string(train.iterations_per_scan)},
      {"mesh.cell", d(mesh.cell)},
      {"eval.threshold_cm", d(eval.threshold_cm)},
      {"eval.samples", std::to_string(eval.samples)},
      {"eval.every", std::to_string(eval.every)},
  };
}

std::string RunConfig::to_ini() const {
  std::string out;
  std::string current;
  for (const auto& [k, v] : echo()) {
    const auto dot = k.find('.');
    const std::string section = k.substr(0, dot);
    if (section != current) {
      out += (current.empty() ? "" : "\n") + fmt::format("[{}]\n", section);
      current = section;
    }
    out += fmt::format("{} = {}\n", k.substr(dot + 1), v);
  }
  return out;
}

}  // namespace dnmap::cli
