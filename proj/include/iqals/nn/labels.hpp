#ifndef IQALS_NN_LABELS_HPP
#define IQALS_NN_LABELS_HPP

// Target distributions and the distribution-matching losses.

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iqals/error.hpp"

namespace iqals::nn {

inline constexpr int kNumClasses = 10;

struct ProbDistribution {
  std::vector<double> probs;

  int classes() const { return static_cast<int>(probs.size()); }
  double operator[](int k) const { return probs[static_cast<std::size_t>(k)]; }

  bool is_valid(double tolerance = 1e-9) const {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0)) return false;
      sum += p;
    }
    return !probs.empty() && std::abs(sum - 1.0) <= tolerance;
  }

  friend bool operator==(const ProbDistribution&, const ProbDistribution&) = default;
};

inline ProbDistribution onehot(int label, int classes = kNumClasses) {
  if (label < 0 || label >= classes) {
    throw ParameterError("label " + std::to_string(label) + " outside [0," +
                         std::to_string(classes) + ")");
  }
  ProbDistribution q{std::vector<double>(static_cast<std::size_t>(classes), 0.0)};
  q.probs[static_cast<std::size_t>(label)] = 1.0;
  return q;
}

// Quality-driven label smoothing: the true class receives the transformed
// quality score s, the remaining mass is spread uniformly.
inline ProbDistribution smooth_labels(int label, double score, int classes = kNumClasses) {
  if (!(score > 0.0 && score <= 1.0)) {
    throw ParameterError("quality score " + std::to_string(score) + " outside (0,1]");
  }
  if (score == 1.0) return onehot(label, classes);
  if (label < 0 || label >= classes) {
    throw ParameterError("label " + std::to_string(label) + " outside [0," +
                         std::to_string(classes) + ")");
  }
  ProbDistribution q{
      std::vector<double>(static_cast<std::size_t>(classes), (1.0 - score) / (classes - 1))};
  q.probs[static_cast<std::size_t>(label)] = score;
  return q;
}

enum class LossKind { kSquaredError, kCrossEntropy };

inline std::string_view to_string(LossKind kind) {
  return kind == LossKind::kSquaredError ? "squared_error" : "cross_entropy";
}

inline LossKind parse_loss_kind(std::string_view name) {
  if (name == "squared_error") return LossKind::kSquaredError;
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  throw ConfigError("unknown loss '" + std::string(name) + "' (squared_error|cross_entropy)");
}

// Squared Euclidean distance between predicted and target distributions.
inline double loss(std::span<const double> p, std::span<const double> q) {
  double l = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) l += (p[k] - q[k]) * (p[k] - q[k]);
  return l;
}

inline double loss(const ProbDistribution& p, const ProbDistribution& q) {
  return loss(p.probs, q.probs);
}

inline double cross_entropy(std::span<const double> p, std::span<const double> q) {
  double l = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (q[k] > 0.0) l -= q[k] * std::log(std::max(p[k], 1e-300));
  return l;
}

inline double sample_loss(LossKind kind, std::span<const double> p, std::span<const double> q) {
  return kind == LossKind::kSquaredError ? loss(p, q) : cross_entropy(p, q);
}

// d(sample loss)/d(logits), given softmax output p.
inline std::vector<double> loss_logit_gradient(LossKind kind, std::span<const double> p,
                                               std::span<const double> q) {
  std::vector<double> g(p.size());
  if (kind == LossKind::kCrossEntropy) {
    for (std::size_t k = 0; k < p.size(); ++k) g[k] = p[k] - q[k];
    return g;
  }
  // dL/dp_k = 2 (p_k - q_k); softmax Jacobian: dz_j = p_j (dp_j - sum_k p_k dp_k)
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) dot += p[k] * 2.0 * (p[k] - q[k]);
  for (std::size_t j = 0; j < p.size(); ++j) g[j] = p[j] * (2.0 * (p[j] - q[j]) - dot);
  return g;
}

}  // namespace iqals::nn

#endif  // IQALS_NN_LABELS_HPP
