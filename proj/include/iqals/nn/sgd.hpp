#ifndef IQALS_NN_SGD_HPP
#define IQALS_NN_SGD_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "iqals/error.hpp"
#include "iqals/nn/labels.hpp"
#include "iqals/nn/network.hpp"

namespace iqals::nn {

struct TrainingConfig {
  int batch_size = 100;
  int epochs = 2000;
  double initial_learning_rate = 0.1;
  double decay_factor = 0.1;
  int decay_every = 350;  // epochs per decay step
  double weight_decay = 0.004;
  double momentum = 0.0;
  LossKind loss = LossKind::kSquaredError;
  std::uint64_t seed = 0;

  // 100 epochs, decay boundary rescaled to keep the schedule's shape.
  static TrainingConfig desk_scale() {
    TrainingConfig c;
    c.epochs = 100;
    c.decay_every = 17;
    return c;
  }

  void validate() const {
    if (batch_size <= 0 || epochs <= 0 || decay_every <= 0)
      throw ConfigError("batch size, epochs and decay interval must be positive");
    if (!(initial_learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(decay_factor > 0.0 && decay_factor < 1.0))
      throw ConfigError("decay factor must lie in (0,1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  }
};

// Step decay: lr(e) = lr0 * factor^floor(e / decay_every).
inline double learning_rate(const TrainingConfig& c, int epoch) {
  return c.initial_learning_rate * std::pow(c.decay_factor, epoch / c.decay_every);
}

// params <- params - lr * grads, or the heavy-ball form when momentum > 0:
//   v <- momentum * v + grads;  params <- params - lr * v.
// The fc weight-decay term is already part of the gradients.
template <typename T>
void sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, const TrainingConfig& config,
              int epoch, ModelParams<T>* velocity = nullptr) {
  if (!(params.arch == grads.arch)) throw StructuralError("sgd: gradient shapes differ");
  const T lr = static_cast<T>(learning_rate(config, epoch));
  const T mu = static_cast<T>(config.momentum);
  std::vector<const std::vector<T>*> g;
  grads.for_each([&](const char*, const std::vector<T>& v) { g.push_back(&v); });
  std::vector<std::vector<T>*> vel;
  if (velocity && config.momentum > 0.0) {
    velocity->for_each([&](const char*, std::vector<T>& v) { vel.push_back(&v); });
  }
  std::size_t t = 0;
  params.for_each([&](const char*, std::vector<T>& p) {
    const auto& gt = *g[t];
    if (!vel.empty()) {
      auto& vt = *vel[t];
      for (std::size_t i = 0; i < p.size(); ++i) {
        vt[i] = mu * vt[i] + gt[i];
        p[i] -= lr * vt[i];
      }
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * gt[i];
    }
    ++t;
  });
  ++params.version;
}

}  // namespace iqals::nn

#endif  // IQALS_NN_SGD_HPP
