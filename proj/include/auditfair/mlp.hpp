#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "auditfair/encode.hpp"

namespace auditfair {

struct MlpParams {
  std::vector<int> hidden = {128, 64, 32};
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int epochs = 50;
  uint64_t seed = 0;

  void validate() const;
};

// Output head + loss pairing. Training always uses SigmoidBce; LinearSquared
// exists for gradient diagnostics against the closed-form linear-model
// gradient.
enum class LossKind : uint8_t { SigmoidBce, LinearSquared };

// Fully connected net, ReLU hidden activations. weights[l] has shape
// dims[l] x dims[l+1], stored row-major (input index major), biases[l] has
// dims[l+1] entries.
template <class Real>
struct MlpModelT {
  std::vector<int> dims;  // [d, hidden..., 1]
  std::vector<std::vector<Real>> weights;
  std::vector<std::vector<Real>> biases;

  size_t n_inputs() const { return dims.empty() ? 0 : static_cast<size_t>(dims.front()); }
  size_t n_layers() const { return weights.size(); }
};

using MlpModel = MlpModelT<float>;    // used for training/prediction
using MlpModelF64 = MlpModelT<double>;  // used by gradient diagnostics

// He-uniform weights, zero biases; stream (seed, "mlp-init", layer).
template <class Real>
MlpModelT<Real> init_mlp(size_t n_inputs, const std::vector<int>& hidden, uint64_t seed);

struct MlpFitInfo {
  double final_loss = 0;
  std::vector<double> epoch_losses;  // mean per-sample BCE per epoch
};

// Mini-batch Adam on binary cross-entropy. Deterministic given params.seed:
// fixed He-uniform init and a fixed shuffle stream per epoch. Throws
// NonFiniteLoss if the loss stops being finite.
MlpModel fit_mlp(const FeatureMatrix& x, std::span<const uint8_t> y, const MlpParams& params,
                 MlpFitInfo* info = nullptr);

// Forward pass; outputs strictly inside (0, 1).
std::vector<double> mlp_predict_proba(const MlpModel& model, const FeatureMatrix& x);

// Max relative error between backprop gradients and central finite
// differences over every parameter, on one small batch. Run on the double
// instantiation; the float path shares the same templated code. Returns 0
// for an empty batch.
double gradient_check(const MlpModelF64& model, const FeatureMatrix& x, std::span<const uint8_t> y,
                      LossKind loss = LossKind::SigmoidBce, double fd_step = 1e-5);

// Analytic gradient of the mean loss, flattened layer by layer
// (weights then biases per layer). Exposed for the diagnostics tests.
std::vector<double> mlp_gradient(const MlpModelF64& model, const FeatureMatrix& x,
                                 std::span<const uint8_t> y, LossKind loss = LossKind::SigmoidBce);
double mlp_loss(const MlpModelF64& model, const FeatureMatrix& x, std::span<const uint8_t> y,
                LossKind loss = LossKind::SigmoidBce);

// Same structured-text convention as the forest files.
void save_mlp(const MlpModel& model, std::ostream& out);
void save_mlp(const MlpModel& model, const std::string& path);
MlpModel load_mlp(std::istream& in);
MlpModel load_mlp_file(const std::string& path);

}  // namespace auditfair
