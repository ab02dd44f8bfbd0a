#pragma once

#include "dnmap/neural_map.hpp"
#include "dnmap/sampler.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dnmap {

inline constexpr double kLogitClamp = 15.0;
inline constexpr double kProbClamp = 1e-7;

struct LossConfig {
  double sigma = 0.05;         // s: sigmoid flatness, meters
  double lambda = 0.1;         // Eikonal weight
  double eikonal_step = 0.0;   // meters; <= 0 means leaf_voxel_size / 20

  void validate() const;
  double step_for(const OctreeConfig& octree) const {
    return eikonal_step > 0 ? eikonal_step : octree.leaf_voxel_size / 20.0;
  }
};

/// Binary cross-entropy between sigma(logit) and sigma(label / s), with the
/// logit clamped to +-15 and both probabilities clamped to [1e-7, 1 - 1e-7].
template <class T>
T sdf_loss(T logit, T label, T sigma);

/// d sdf_loss / d logit = sigma(logit) - sigma(label / s), exact for
/// |logit| < 15. Beyond the clamp the value is flat but this keeps the
/// saturated slope, so a confidently wrong sample is still pulled back.
template <class T>
T sdf_loss_grad(T logit, T label, T sigma);

/// (|g| - 1)^2 for a gradient estimate g.
template <class T>
T eikonal_loss(const Eigen::Matrix<T, 3, 1>& gradient);

/// Central-difference gradient of Phi at x; nullopt if any probe misses every level.
template <class T>
std::optional<Eigen::Matrix<T, 3, 1>> sdf_gradient(const NeuralMap<T>& map, const Vec3& x,
                                                   double step, Pass pass = Pass::infer,
                                                   QueryPath path = QueryPath::efficient);

struct LossStats {
  double total = 0;
  double sdf = 0;       // mean over used samples
  double eikonal = 0;   // mean over used samples (skipped samples contribute 0)
  std::size_t used = 0;             // samples with at least one level hit
  std::size_t eikonal_count = 0;    // samples whose six probes all hit
};

/// Reusable buffers for total_loss.
template <class T>
struct LossWorkspace {
  std::vector<Stencil> stencils;
  std::vector<T> grad_z;
  std::vector<std::uint8_t> active;
  std::vector<std::vector<T>> decoder_grads;
};

/// Mean over the batch of sdf_loss(Phi / s, label, s) + lambda * eikonal.
/// Samples that miss every level are dropped. When `backward` is set,
/// gradients are accumulated (not zeroed) into every map parameter; the
/// decoder's per-chunk gradients are reduced in chunk order, so results
/// depend only on the thread count.
template <class T>
LossStats total_loss(NeuralMap<T>& map, std::span<const TrainingSample> batch,
                     const LossConfig& config, QueryPath path, int threads, bool backward = true,
                     LossWorkspace<T>* workspace = nullptr, OpCounter* ops = nullptr);

}  // namespace dnmap
