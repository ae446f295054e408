#include "fedq/core_ml.hpp"

#include <algorithm>
#include <cmath>

#include "fedq/data.hpp"
#include "fedq/errors.hpp"

namespace fedq {

namespace {

void check_spec(const model_spec& spec) {
  if (spec.input_dim <= 0 || spec.n_classes < 2)
    throw dimension_error("model spec needs input_dim > 0 and n_classes >= 2");
  if (spec.kind == model_kind::mlp && spec.hidden <= 0)
    throw dimension_error("mlp spec needs hidden > 0");
}

void check_batch(const model& m, const batch& b) {
  if (b.n <= 0) throw dimension_error("empty batch");
  if (b.dim != m.spec.input_dim)
    throw dimension_error("batch dim " + std::to_string(b.dim) +
                          " != model input_dim " +
                          std::to_string(m.spec.input_dim));
  if (static_cast<int>(b.x.size()) != b.n * b.dim ||
      static_cast<int>(b.y.size()) != b.n)
    throw dimension_error("batch buffer sizes inconsistent with n/dim");
}

// Stable log-softmax denominator: returns logsumexp(z) for one row.
double logsumexp(const double* z, int k) {
  double zmax = z[0];
  for (int c = 1; c < k; ++c) zmax = std::max(zmax, z[c]);
  double s = 0.0;
  for (int c = 0; c < k; ++c) s += std::exp(z[c] - zmax);
  return zmax + std::log(s);
}

// logits = W x + b for one layer stored at w[off...]; W is (out x in)
// row-major followed by out biases.
void affine(const double* w, int in, int out, const double* x, double* z) {
  const double* bias = w + static_cast<std::size_t>(in) * out;
  for (int o = 0; o < out; ++o) {
    double acc = bias[o];
    const double* row = w + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    z[o] = acc;
  }
}

}  // namespace

int param_count(const model_spec& spec) {
  check_spec(spec);
  if (spec.kind == model_kind::logistic)
    return spec.n_classes * spec.input_dim + spec.n_classes;
  return spec.hidden * spec.input_dim + spec.hidden +
         spec.n_classes * spec.hidden + spec.n_classes;
}

model init_model(const model_spec& spec, rng_stream& rng) {
  model m;
  m.spec = spec;
  m.w.resize(static_cast<std::size_t>(param_count(spec)));
  const auto fill_layer = [&](std::size_t off, int in, int out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const std::size_t count = static_cast<std::size_t>(in) * out + out;
    for (std::size_t i = 0; i < count; ++i)
      m.w[off + i] = rng.uniform(-bound, bound);
    return off + count;
  };
  if (spec.kind == model_kind::logistic) {
    fill_layer(0, spec.input_dim, spec.n_classes);
  } else {
    std::size_t off = fill_layer(0, spec.input_dim, spec.hidden);
    fill_layer(off, spec.hidden, spec.n_classes);
  }
  return m;
}

double forward_loss(const model& m, const batch& b) {
  check_batch(m, b);
  const int C = m.spec.n_classes;
  const int D = m.spec.input_dim;
  std::vector<double> z(static_cast<std::size_t>(C));
  std::vector<double> h;  // mlp hidden activations
  const int H = m.spec.hidden;
  if (m.spec.kind == model_kind::mlp) h.resize(static_cast<std::size_t>(H));
  double loss = 0.0;
  for (int i = 0; i < b.n; ++i) {
    const double* x = b.x.data() + static_cast<std::size_t>(i) * D;
    if (m.spec.kind == model_kind::logistic) {
      affine(m.w.data(), D, C, x, z.data());
    } else {
      affine(m.w.data(), D, H, x, h.data());
      for (int j = 0; j < H; ++j) h[j] = std::max(0.0, h[j]);
      affine(m.w.data() + static_cast<std::size_t>(H) * D + H, H, C, h.data(),
             z.data());
    }
    const int y = b.y[i];
    if (y < 0 || y >= C)
      throw dimension_error("label " + std::to_string(y) +
                            " outside [0, n_classes)");
    loss += logsumexp(z.data(), C) - z[static_cast<std::size_t>(y)];
  }
  return loss / b.n;
}

std::vector<double> gradient(const model& m, const batch& b, double* loss_out) {
  check_batch(m, b);
  const int C = m.spec.n_classes;
  const int D = m.spec.input_dim;
  const int H = m.spec.hidden;
  std::vector<double> g(m.w.size(), 0.0);
  std::vector<double> z(static_cast<std::size_t>(C));
  std::vector<double> p(static_cast<std::size_t>(C));
  std::vector<double> h, dh;
  if (m.spec.kind == model_kind::mlp) {
    h.resize(static_cast<std::size_t>(H));
    dh.resize(static_cast<std::size_t>(H));
  }
  const double inv_n = 1.0 / b.n;
  double loss = 0.0;
  for (int i = 0; i < b.n; ++i) {
    const double* x = b.x.data() + static_cast<std::size_t>(i) * D;
    const int y = b.y[i];
    if (y < 0 || y >= C)
      throw dimension_error("label " + std::to_string(y) +
                            " outside [0, n_classes)");
    if (m.spec.kind == model_kind::logistic) {
      affine(m.w.data(), D, C, x, z.data());
      const double lse = logsumexp(z.data(), C);
      loss += lse - z[static_cast<std::size_t>(y)];
      for (int c = 0; c < C; ++c) {
        // d loss / d z_c, already averaged over the batch
        double d = std::exp(z[c] - lse) * inv_n;
        if (c == y) d -= inv_n;
        p[c] = d;
      }
      for (int c = 0; c < C; ++c) {
        double* grow = g.data() + static_cast<std::size_t>(c) * D;
        const double d = p[c];
        for (int k = 0; k < D; ++k) grow[k] += d * x[k];
        g[static_cast<std::size_t>(C) * D + c] += d;
      }
    } else {
      const std::size_t w2_off = static_cast<std::size_t>(H) * D + H;
      affine(m.w.data(), D, H, x, h.data());
      for (int j = 0; j < H; ++j) h[j] = std::max(0.0, h[j]);
      affine(m.w.data() + w2_off, H, C, h.data(), z.data());
      const double lse = logsumexp(z.data(), C);
      loss += lse - z[static_cast<std::size_t>(y)];
      for (int c = 0; c < C; ++c) {
        double d = std::exp(z[c] - lse) * inv_n;
        if (c == y) d -= inv_n;
        p[c] = d;
      }
      // output layer grads + backprop into hidden
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int c = 0; c < C; ++c) {
        const double d = p[c];
        const double* w2row = m.w.data() + w2_off + static_cast<std::size_t>(c) * H;
        double* g2row = g.data() + w2_off + static_cast<std::size_t>(c) * H;
        for (int j = 0; j < H; ++j) {
          g2row[j] += d * h[j];
          dh[j] += d * w2row[j];
        }
        g[w2_off + static_cast<std::size_t>(C) * H + c] += d;
      }
      // ReLU gate, then first layer grads
      for (int j = 0; j < H; ++j) {
        if (h[j] <= 0.0) continue;
        const double d = dh[j];
        double* g1row = g.data() + static_cast<std::size_t>(j) * D;
        for (int k = 0; k < D; ++k) g1row[k] += d * x[k];
        g[static_cast<std::size_t>(H) * D + j] += d;
      }
    }
  }
  if (loss_out) *loss_out = loss * inv_n;
  return g;
}

model sgd_step(const model& m, const std::vector<double>& g, double lr) {
  if (g.size() != m.w.size())
    throw dimension_error("gradient size " + std::to_string(g.size()) +
                          " != param count " + std::to_string(m.w.size()));
  model out = m;
  for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] -= lr * g[i];
  return out;
}

double lr_at_round(int round, double initial, double decay) {
  if (round < 0) throw sim_error("negative round in lr schedule");
  return initial * std::pow(decay, static_cast<double>(round));
}

eval_result evaluate(const model& m, const dataset& d) {
  if (d.n <= 0) throw dimension_error("evaluate: empty dataset");
  if (d.dim != m.spec.input_dim)
    throw dimension_error("evaluate: dataset dim != model input_dim");
  const int C = m.spec.n_classes;
  const int D = d.dim;
  const int H = m.spec.hidden;
  std::vector<double> z(static_cast<std::size_t>(C));
  std::vector<double> h;
  if (m.spec.kind == model_kind::mlp) h.resize(static_cast<std::size_t>(H));
  double loss = 0.0;
  long correct = 0;
  for (int i = 0; i < d.n; ++i) {
    const double* x = d.x.data() + static_cast<std::size_t>(i) * D;
    if (m.spec.kind == model_kind::logistic) {
      affine(m.w.data(), D, C, x, z.data());
    } else {
      affine(m.w.data(), D, H, x, h.data());
      for (int j = 0; j < H; ++j) h[j] = std::max(0.0, h[j]);
      affine(m.w.data() + static_cast<std::size_t>(H) * D + H, H, C, h.data(),
             z.data());
    }
    const int y = d.y[i];
    if (y < 0 || y >= C)
      throw dimension_error("evaluate: label outside [0, n_classes)");
    loss += logsumexp(z.data(), C) - z[static_cast<std::size_t>(y)];
    int arg = 0;
    for (int c = 1; c < C; ++c)
      if (z[c] > z[arg]) arg = c;  // ties keep the lowest index
    if (arg == y) ++correct;
  }
  return {loss / d.n, static_cast<double>(correct) / d.n};
}

}  // namespace fedq
