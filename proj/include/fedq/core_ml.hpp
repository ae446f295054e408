#pragma once

#include <string>
#include <vector>

#include "fedq/rng.hpp"

namespace fedq {

// Minimal training core: multinomial logistic regression and a one-hidden-
// layer ReLU MLP, softmax cross-entropy, analytic gradients, plain SGD.
// Everything is double precision and allocation order is fixed, so model
// trajectories are bit-reproducible.

enum class model_kind { logistic, mlp };

struct model_spec {
  model_kind kind = model_kind::logistic;
  int input_dim = 0;
  int n_classes = 0;
  int hidden = 64;  // ignored for logistic
};

// Number of parameters in the canonical flat layout.
int param_count(const model_spec& spec);

// Flat parameter vector. Layout is layer-major, each weight matrix row-major
// with rows = output units, followed by that layer's biases:
//   logistic: [W (C x D), b (C)]
//   mlp:      [W1 (H x D), b1 (H), W2 (C x H), b2 (C)]
struct model {
  model_spec spec;
  std::vector<double> w;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer (biases use
// their layer's fan_in), drawn in flat layout order.
model init_model(const model_spec& spec, rng_stream& rng);

// Dense row-major minibatch.
struct batch {
  int n = 0;
  int dim = 0;
  std::vector<double> x;  // n * dim
  std::vector<int> y;     // n labels in [0, n_classes)
};

// Mean softmax cross-entropy over the batch (natural log, logsumexp-stable).
double forward_loss(const model& m, const batch& b);

// Analytic gradient of forward_loss w.r.t. the flat parameters. If loss_out
// is non-null it receives the batch loss from the same forward pass.
std::vector<double> gradient(const model& m, const batch& b,
                             double* loss_out = nullptr);

// w' = w - lr * g. Pure; callers keep the original.
model sgd_step(const model& m, const std::vector<double>& g, double lr);

// Per-round learning rate: initial * decay^round.
double lr_at_round(int round, double initial = 0.01, double decay = 0.995);

struct eval_result {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct dataset;  // data.hpp

// Deterministic full pass over the dataset: mean cross-entropy and argmax
// accuracy (ties resolve to the lowest class index).
eval_result evaluate(const model& m, const dataset& d);

}  // namespace fedq
