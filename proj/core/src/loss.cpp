#include "dnmap/loss.hpp"

#include "dnmap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dnmap {

void LossConfig::validate() const {
  if (!(sigma > 0)) throw std::invalid_argument("sigma must be positive");
  if (!(lambda >= 0)) throw std::invalid_argument("eikonal weight must be non-negative");
}

template <class T>
T sdf_loss(T logit, T label, T sigma) {
  const T kc = static_cast<T>(kLogitClamp);
  const T pc = static_cast<T>(kProbClamp);
  const T p = std::clamp(dnmap::sigmoid(std::clamp(logit, -kc, kc)), pc, T(1) - pc);
  const T y = std::clamp(dnmap::sigmoid(std::clamp(label / sigma, -kc, kc)), pc, T(1) - pc);
  return -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
}

template <class T>
T sdf_loss_grad(T logit, T label, T sigma) {
  const T kc = static_cast<T>(kLogitClamp);
  return dnmap::sigmoid(std::clamp(logit, -kc, kc)) - dnmap::sigmoid(std::clamp(label / sigma, -kc, kc));
}

template <class T>
T eikonal_loss(const Eigen::Matrix<T, 3, 1>& g) {
  const T r = g.norm() - T(1);
  return r * r;
}

template <class T>
std::optional<Eigen::Matrix<T, 3, 1>> sdf_gradient(const NeuralMap<T>& map, const Vec3& x,
                                                   double step, Pass pass, QueryPath path) {
  Eigen::Matrix<T, 3, 1> g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = step;
    const auto hi = map.sdf(x + e, pass, path);
    const auto lo = map.sdf(x - e, pass, path);
    if (!hi || !lo) return std::nullopt;
    g[a] = (*hi - *lo) / static_cast<T>(2 * step);
  }
  return g;
}

namespace {

// Evaluation k of a sample: 0 is the sample itself, 1 + 2a (+) and 2 + 2a (-)
// are the Eikonal probes along axis a.
constexpr int kEvalsPerSample = 7;

}  // namespace

template <class T>
LossStats total_loss(NeuralMap<T>& map, std::span<const TrainingSample> batch,
                     const LossConfig& config, QueryPath path, int threads, bool backward,
                     LossWorkspace<T>* workspace, OpCounter* ops) {
  config.validate();
  if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
  LossWorkspace<T> local;
  LossWorkspace<T>& ws = workspace ? *workspace : local;

  const std::size_t n = batch.size();
  const auto D = static_cast<std::size_t>(map.config().dim);
  const bool eik = config.lambda > 0;
  const int evals = eik ? kEvalsPerSample : 1;
  const double eps = config.step_for(map.config().octree);
  const T sigma = static_cast<T>(config.sigma);
  const SparseOctree& tree = map.tree();
  FeatureField<T>& features = map.features();
  const Decoder<T>& decoder = map.decoder();

  if (path == QueryPath::basic) features.prepare_basic(Pass::train, ops);

  ws.stencils.resize(n * static_cast<std::size_t>(evals));
  ws.active.assign(n, 0);
  if (backward) ws.grad_z.assign(n * static_cast<std::size_t>(evals) * D, T(0));

  const int nt = resolve_threads(threads);
  const std::size_t chunks = chunk_count(n, nt);
  ws.decoder_grads.resize(chunks);
  std::vector<double> sdf_sum(chunks, 0.0), eik_sum(chunks, 0.0);
  std::vector<std::size_t> used(chunks, 0), eik_count(chunks, 0);
  std::vector<OpCounter> chunk_ops(chunks);

  // Phase 1: stencils, decoder forward/backward and dL/dz for every evaluation.
  // The normalization by the used-sample count is applied in phase 2.
  parallel_chunks(n, nt, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& dgrad = ws.decoder_grads[chunk];
    if (backward) dgrad.assign(decoder.parameter_count(), T(0));
    typename Decoder<T>::Cache cache[kEvalsPerSample];
    std::vector<T> z(D);
    T phi[kEvalsPerSample];
    OpCounter* op = ops ? &chunk_ops[chunk] : nullptr;
    for (std::size_t i = begin; i < end; ++i) {
      const TrainingSample& s = batch[i];
      Stencil* st = &ws.stencils[i * static_cast<std::size_t>(evals)];
      st[0] = tree.query(s.x);
      if (!st[0].any_hit()) continue;
      ws.active[i] = 1;
      ++used[chunk];

      bool probes_ok = eik;
      if (eik) {
        for (int a = 0; a < 3 && probes_ok; ++a) {
          Vec3 e = Vec3::Zero();
          e[a] = eps;
          st[1 + 2 * a] = tree.query(s.x + e);
          st[2 + 2 * a] = tree.query(s.x - e);
          probes_ok = st[1 + 2 * a].any_hit() && st[2 + 2 * a].any_hit();
        }
      }
      const int k_end = probes_ok ? kEvalsPerSample : 1;
      for (int k = 0; k < k_end; ++k) {
        std::fill(z.begin(), z.end(), T(0));
        features.query(st[k], z, Pass::train, path, op);
        phi[k] = decoder.forward(std::span<const T>(z), cache[k]);
      }

      const T logit = phi[0] / sigma;
      const T label = static_cast<T>(s.label);
      sdf_sum[chunk] += static_cast<double>(sdf_loss(logit, label, sigma));
      T up[kEvalsPerSample] = {};
      up[0] = sdf_loss_grad(logit, label, sigma) / sigma;

      if (probes_ok) {
        Eigen::Matrix<T, 3, 1> g;
        for (int a = 0; a < 3; ++a) g[a] = (phi[1 + 2 * a] - phi[2 + 2 * a]) / static_cast<T>(2 * eps);
        eik_sum[chunk] += static_cast<double>(eikonal_loss(g));
        ++eik_count[chunk];
        const T norm = g.norm();
        if (norm > T(0)) {
          const T scale = static_cast<T>(config.lambda) * T(2) * (norm - T(1)) / norm /
                          static_cast<T>(2 * eps);
          for (int a = 0; a < 3; ++a) {
            up[1 + 2 * a] = scale * g[a];
            up[2 + 2 * a] = -scale * g[a];
          }
        }
      }
      if (!backward) continue;
      for (int k = 0; k < k_end; ++k) {
        T* gz = &ws.grad_z[(i * static_cast<std::size_t>(evals) + static_cast<std::size_t>(k)) * D];
        decoder.backward(cache[k], up[k], std::span<T>(gz, D), dgrad);
      }
      if (!probes_ok && eik) {
        for (int k = 1; k < kEvalsPerSample; ++k) st[k].levels = 0;
      }
    }
  });

  LossStats stats;
  for (std::size_t c = 0; c < chunks; ++c) {
    stats.used += used[c];
    stats.eikonal_count += eik_count[c];
    stats.sdf += sdf_sum[c];
    stats.eikonal += eik_sum[c];
    if (ops) ops->compose_ops += chunk_ops[c].compose_ops;
  }
  if (stats.used == 0) return stats;
  const double inv = 1.0 / static_cast<double>(stats.used);
  stats.sdf *= inv;
  stats.eikonal *= inv;
  stats.total = stats.sdf + config.lambda * stats.eikonal;
  if (!backward) return stats;

  // Phase 2: serial scatter into feature parameters.
  const T scale = static_cast<T>(inv);
  auto& dparams = map.decoder().params().grad;
  for (std::size_t c = 0; c < chunks; ++c) {
    const auto& dg = ws.decoder_grads[c];
    for (std::size_t j = 0; j < dparams.size(); ++j) dparams[j] += scale * dg[j];
  }
  std::vector<T> gz(D);
  for (std::size_t i = 0; i < n; ++i) {
    if (!ws.active[i]) continue;
    for (int k = 0; k < evals; ++k) {
      const std::size_t e = i * static_cast<std::size_t>(evals) + static_cast<std::size_t>(k);
      const Stencil& st = ws.stencils[e];
      if (k > 0 && st.levels == 0) break;
      const T* src = &ws.grad_z[e * D];
      for (std::size_t d = 0; d < D; ++d) gz[d] = scale * src[d];
      features.backward(st, gz, path);
    }
  }
  features.finish_backward(path);
  return stats;
}

#define DNMAP_INSTANTIATE_LOSS(T)                                                              \
  template T sdf_loss<T>(T, T, T);                                                             \
  template T sdf_loss_grad<T>(T, T, T);                                                        \
  template T eikonal_loss<T>(const Eigen::Matrix<T, 3, 1>&);                                   \
  template std::optional<Eigen::Matrix<T, 3, 1>> sdf_gradient<T>(const NeuralMap<T>&,          \
                                                                 const Vec3&, double, Pass,    \
                                                                 QueryPath);                   \
  template LossStats total_loss<T>(NeuralMap<T>&, std::span<const TrainingSample>,             \
                                   const LossConfig&, QueryPath, int, bool, LossWorkspace<T>*, \
                                   OpCounter*);

DNMAP_INSTANTIATE_LOSS(float)
DNMAP_INSTANTIATE_LOSS(double)

}  // namespace dnmap
