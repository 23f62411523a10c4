#include "auditfair/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "auditfair/rng.hpp"

namespace auditfair {

void MlpParams::validate() const {
  if (hidden.empty()) raise(Errc::InvalidConfig, "need at least one hidden layer");
  for (int h : hidden)
    if (h < 1) raise(Errc::InvalidConfig, "hidden layer sizes must be >= 1");
  if (learning_rate < 0) raise(Errc::InvalidConfig, "learning_rate must be >= 0");
  if (batch_size < 1) raise(Errc::InvalidConfig, "batch_size must be >= 1");
  if (epochs < 1) raise(Errc::InvalidConfig, "epochs must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    raise(Errc::InvalidConfig, "betas must be in [0,1)");
  if (epsilon <= 0) raise(Errc::InvalidConfig, "epsilon must be > 0");
}

template <class Real>
MlpModelT<Real> init_mlp(size_t n_inputs, const std::vector<int>& hidden, uint64_t seed) {
  MlpModelT<Real> m;
  m.dims.push_back(static_cast<int>(n_inputs));
  for (int h : hidden) m.dims.push_back(h);
  m.dims.push_back(1);

  for (size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const size_t fan_in = static_cast<size_t>(m.dims[l]);
    const size_t fan_out = static_cast<size_t>(m.dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng = rng_stream(seed, "mlp-init", l);
    std::vector<Real> w(fan_in * fan_out);
    for (Real& v : w) v = static_cast<Real>(rng.uniform(-limit, limit));
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, Real(0));
  }
  return m;
}

template MlpModelT<float> init_mlp<float>(size_t, const std::vector<int>&, uint64_t);
template MlpModelT<double> init_mlp<double>(size_t, const std::vector<int>&, uint64_t);

namespace {

// batch forward/backward workspace; all matrices row-major [n_rows x width]
template <class Real>
struct Workspace {
  std::vector<std::vector<Real>> activations;  // a[0] = input batch, a[L] = output (prob or linear)
  std::vector<std::vector<Real>> pre;          // z per layer
  std::vector<std::vector<Real>> delta;        // dL/dz per layer
  std::vector<std::vector<Real>> grad_w;
  std::vector<std::vector<Real>> grad_b;
  std::vector<Real> w_transposed;              // scratch for the backward input pass
  size_t current_batch = static_cast<size_t>(-1);

  void resize(const MlpModelT<Real>& m, size_t batch) {
    if (batch == current_batch) return;  // buffers already shaped for this batch
    current_batch = batch;
    const size_t layers = m.n_layers();
    activations.assign(layers + 1, {});
    pre.assign(layers, {});
    delta.assign(layers, {});
    grad_w.resize(layers);
    grad_b.resize(layers);
    activations[0].resize(batch * m.n_inputs());
    for (size_t l = 0; l < layers; ++l) {
      const size_t width = static_cast<size_t>(m.dims[l + 1]);
      activations[l + 1].resize(batch * width);
      pre[l].resize(batch * width);
      delta[l].resize(batch * width);
      grad_w[l].assign(m.weights[l].size(), Real(0));
      grad_b[l].assign(m.biases[l].size(), Real(0));
    }
  }
};

template <class Real>
Real stable_sigmoid(Real z) {
  return z >= Real(0) ? Real(1) / (Real(1) + std::exp(-z))
                      : std::exp(z) / (Real(1) + std::exp(z));
}

// z = a.W + b   (a: [n x in], W: [in x out] row-major). Rows are processed in
// pairs so each weight row is loaded once per pair; zero activations (one-hot
// inputs, ReLU outputs) skip their row entirely.
template <class Real>
void linear_forward(const Real* a, size_t n, size_t in, size_t out, const Real* w, const Real* b,
                    Real* z) {
  size_t i = 0;
  for (; i + 1 < n; i += 2) {
    Real* z0 = z + i * out;
    Real* z1 = z0 + out;
    for (size_t j = 0; j < out; ++j) z0[j] = b[j];
    for (size_t j = 0; j < out; ++j) z1[j] = b[j];
    const Real* a0 = a + i * in;
    const Real* a1 = a0 + in;
    for (size_t k = 0; k < in; ++k) {
      const Real x0 = a0[k], x1 = a1[k];
      const Real* wk = w + k * out;
      if (x0 != Real(0) && x1 != Real(0)) {
        for (size_t j = 0; j < out; ++j) {
          z0[j] += x0 * wk[j];
          z1[j] += x1 * wk[j];
        }
      } else if (x0 != Real(0)) {
        for (size_t j = 0; j < out; ++j) z0[j] += x0 * wk[j];
      } else if (x1 != Real(0)) {
        for (size_t j = 0; j < out; ++j) z1[j] += x1 * wk[j];
      }
    }
  }
  if (i < n) {
    Real* zi = z + i * out;
    for (size_t j = 0; j < out; ++j) zi[j] = b[j];
    const Real* ai = a + i * in;
    for (size_t k = 0; k < in; ++k) {
      const Real aik = ai[k];
      if (aik == Real(0)) continue;
      const Real* wk = w + k * out;
      for (size_t j = 0; j < out; ++j) zi[j] += aik * wk[j];
    }
  }
}

// forward the whole batch; returns mean per-sample loss
template <class Real>
double forward_batch(const MlpModelT<Real>& m, Workspace<Real>& ws, size_t n,
                     const uint8_t* labels, LossKind loss) {
  const size_t layers = m.n_layers();
  for (size_t l = 0; l < layers; ++l) {
    const size_t in = static_cast<size_t>(m.dims[l]);
    const size_t out = static_cast<size_t>(m.dims[l + 1]);
    linear_forward(ws.activations[l].data(), n, in, out, m.weights[l].data(), m.biases[l].data(),
                   ws.pre[l].data());
    Real* z = ws.pre[l].data();
    Real* a = ws.activations[l + 1].data();
    const size_t count = n * out;
    if (l + 1 < layers) {
      for (size_t i = 0; i < count; ++i) a[i] = z[i] > Real(0) ? z[i] : Real(0);
    } else if (loss == LossKind::SigmoidBce) {
      for (size_t i = 0; i < count; ++i) a[i] = stable_sigmoid(z[i]);
    } else {
      std::copy(z, z + count, a);
    }
  }

  if (labels == nullptr) return 0.0;
  double total = 0;
  const Real* z_out = ws.pre[layers - 1].data();
  const Real* a_out = ws.activations[layers].data();
  for (size_t i = 0; i < n; ++i) {
    const double y = labels[i];
    if (loss == LossKind::SigmoidBce) {
      // bce from the logit: softplus(z) - y z, stable for large |z|
      const double z = z_out[i];
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      total += softplus - y * z;
    } else {
      const double diff = static_cast<double>(a_out[i]) - y;
      total += 0.5 * diff * diff;
    }
  }
  return total / static_cast<double>(n);
}

// backward pass; fills ws.grad_w / ws.grad_b with gradients of the MEAN loss.
// The output delta is (a - y)/n for both loss kinds: sigmoid+BCE and
// linear+squared share that form.
template <class Real>
void backward_batch(const MlpModelT<Real>& m, Workspace<Real>& ws, size_t n,
                    const uint8_t* labels) {
  const size_t layers = m.n_layers();
  const Real inv_n = Real(1) / static_cast<Real>(n);

  {
    const Real* a = ws.activations[layers].data();
    Real* d = ws.delta[layers - 1].data();
    for (size_t i = 0; i < n; ++i) d[i] = (a[i] - static_cast<Real>(labels[i])) * inv_n;
  }

  for (size_t l = layers; l-- > 0;) {
    const size_t in = static_cast<size_t>(m.dims[l]);
    const size_t out = static_cast<size_t>(m.dims[l + 1]);
    const Real* a_prev = ws.activations[l].data();
    const Real* d = ws.delta[l].data();

    // grad_w[k][j] = sum_i a_prev[i][k] * d[i][j]; grad_b[j] = sum_i d[i][j]
    Real* gw = ws.grad_w[l].data();
    Real* gb = ws.grad_b[l].data();
    std::fill(ws.grad_w[l].begin(), ws.grad_w[l].end(), Real(0));
    std::fill(ws.grad_b[l].begin(), ws.grad_b[l].end(), Real(0));
    size_t i = 0;
    for (; i + 1 < n; i += 2) {
      const Real* a0 = a_prev + i * in;
      const Real* a1 = a0 + in;
      const Real* d0 = d + i * out;
      const Real* d1 = d0 + out;
      for (size_t j = 0; j < out; ++j) gb[j] += d0[j] + d1[j];
      for (size_t k = 0; k < in; ++k) {
        const Real x0 = a0[k], x1 = a1[k];
        Real* gwk = gw + k * out;
        if (x0 != Real(0) && x1 != Real(0)) {
          for (size_t j = 0; j < out; ++j) gwk[j] += x0 * d0[j] + x1 * d1[j];
        } else if (x0 != Real(0)) {
          for (size_t j = 0; j < out; ++j) gwk[j] += x0 * d0[j];
        } else if (x1 != Real(0)) {
          for (size_t j = 0; j < out; ++j) gwk[j] += x1 * d1[j];
        }
      }
    }
    if (i < n) {
      const Real* ai = a_prev + i * in;
      const Real* di = d + i * out;
      for (size_t j = 0; j < out; ++j) gb[j] += di[j];
      for (size_t k = 0; k < in; ++k) {
        const Real aik = ai[k];
        if (aik == Real(0)) continue;
        Real* gwk = gw + k * out;
        for (size_t j = 0; j < out; ++j) gwk[j] += aik * di[j];
      }
    }

    if (l == 0) break;

    // delta_prev[i][k] = (sum_j d[i][j] * W[k][j]) * relu'(z_prev[i][k])
    ws.w_transposed.resize(in * out);
    const Real* w = m.weights[l].data();
    for (size_t k = 0; k < in; ++k)
      for (size_t j = 0; j < out; ++j) ws.w_transposed[j * in + k] = w[k * out + j];

    Real* d_prev = ws.delta[l - 1].data();
    const Real* z_prev = ws.pre[l - 1].data();
    std::fill(ws.delta[l - 1].begin(), ws.delta[l - 1].end(), Real(0));
    for (size_t i = 0; i < n; ++i) {
      const Real* di = d + i * out;
      Real* dpi = d_prev + i * in;
      for (size_t j = 0; j < out; ++j) {
        const Real dij = di[j];
        if (dij == Real(0)) continue;
        const Real* wt = ws.w_transposed.data() + j * in;
        for (size_t k = 0; k < in; ++k) dpi[k] += dij * wt[k];
      }
      const Real* zi = z_prev + i * in;
      for (size_t k = 0; k < in; ++k)
        if (zi[k] <= Real(0)) dpi[k] = Real(0);
    }
  }
}

template <class Real>
void load_batch(const FeatureMatrix& x, std::span<const size_t> rows, std::vector<Real>& dst) {
  const size_t cols = x.cols;
  dst.resize(rows.size() * cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* src = x.values.data() + rows[i] * cols;
    for (size_t c = 0; c < cols; ++c) dst[i * cols + c] = static_cast<Real>(src[c]);
  }
}

struct AdamState {
  size_t step = 0;
  std::vector<std::vector<float>> m_w, v_w, m_b, v_b;

  void init(const MlpModel& model) {
    for (size_t l = 0; l < model.n_layers(); ++l) {
      m_w.emplace_back(model.weights[l].size(), 0.f);
      v_w.emplace_back(model.weights[l].size(), 0.f);
      m_b.emplace_back(model.biases[l].size(), 0.f);
      v_b.emplace_back(model.biases[l].size(), 0.f);
    }
  }

  void update(MlpModel& model, const Workspace<float>& ws, const MlpParams& p) {
    ++step;
    const float b1 = static_cast<float>(p.beta1), b2 = static_cast<float>(p.beta2);
    const float one_m_b1 = 1.f - b1, one_m_b2 = 1.f - b2;
    // fold the bias corrections into the step size and the sqrt argument
    const double corr1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
    const double corr2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
    const float lr_hat = static_cast<float>(p.learning_rate / corr1);
    const float inv_sqrt_corr2 = static_cast<float>(1.0 / std::sqrt(corr2));
    const float eps = static_cast<float>(p.epsilon);
    auto apply = [&](std::vector<float>& param, const std::vector<float>& grad,
                     std::vector<float>& m, std::vector<float>& v) {
      float* pm = m.data();
      float* pv = v.data();
      float* pp = param.data();
      const float* pg = grad.data();
      const size_t count = param.size();
      for (size_t i = 0; i < count; ++i) {
        const float g = pg[i];
        pm[i] = b1 * pm[i] + one_m_b1 * g;
        pv[i] = b2 * pv[i] + one_m_b2 * g * g;
        pp[i] -= lr_hat * pm[i] / (std::sqrt(pv[i]) * inv_sqrt_corr2 + eps);
      }
    };
    for (size_t l = 0; l < model.n_layers(); ++l) {
      apply(model.weights[l], ws.grad_w[l], m_w[l], v_w[l]);
      apply(model.biases[l], ws.grad_b[l], m_b[l], v_b[l]);
    }
  }
};

}  // namespace

MlpModel fit_mlp(const FeatureMatrix& x, std::span<const uint8_t> y, const MlpParams& params,
                 MlpFitInfo* info) {
  params.validate();
  if (x.rows != y.size())
    raise(Errc::ShapeMismatch, "feature rows (" + std::to_string(x.rows) + ") != labels (" +
                                   std::to_string(y.size()) + ")");
  if (x.rows == 0) raise(Errc::EmptyTrainingSet, "no training rows");

  MlpModel model = init_mlp<float>(x.cols, params.hidden, params.seed);
  AdamState adam;
  adam.init(model);

  const size_t n = x.rows;
  const size_t batch = static_cast<size_t>(params.batch_size);
  Workspace<float> ws;

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<uint8_t> batch_y(batch);

  if (info) info->epoch_losses.clear();
  double epoch_loss = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    Rng rng = rng_stream(params.seed, "mlp-shuffle", static_cast<uint64_t>(epoch));
    rng.shuffle(order);

    double total = 0;
    for (size_t start = 0; start < n; start += batch) {
      const size_t count = std::min(batch, n - start);
      std::span<const size_t> rows(order.data() + start, count);
      ws.resize(model, count);
      load_batch(x, rows, ws.activations[0]);
      for (size_t i = 0; i < count; ++i) batch_y[i] = y[rows[i]];

      const double loss =
          forward_batch(model, ws, count, batch_y.data(), LossKind::SigmoidBce);
      if (!std::isfinite(loss))
        raise(Errc::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch));
      total += loss * static_cast<double>(count);

      backward_batch(model, ws, count, batch_y.data());
      adam.update(model, ws, params);
    }
    epoch_loss = total / static_cast<double>(n);
    if (info) info->epoch_losses.push_back(epoch_loss);
  }
  if (info) info->final_loss = epoch_loss;
  return model;
}

std::vector<double> mlp_predict_proba(const MlpModel& model, const FeatureMatrix& x) {
  if (x.cols != model.n_inputs())
    raise(Errc::ShapeMismatch, "model expects " + std::to_string(model.n_inputs()) +
                                   " features, got " + std::to_string(x.cols));
  std::vector<double> out(x.rows);
  Workspace<float> ws;
  const size_t chunk = 1024;
  std::vector<size_t> rows;
  for (size_t start = 0; start < x.rows; start += chunk) {
    const size_t count = std::min(chunk, x.rows - start);
    rows.resize(count);
    for (size_t i = 0; i < count; ++i) rows[i] = start + i;
    ws.resize(model, count);
    load_batch(x, rows, ws.activations[0]);
    forward_batch(model, ws, count, nullptr, LossKind::SigmoidBce);
    const float* p = ws.activations[model.n_layers()].data();
    for (size_t i = 0; i < count; ++i) {
      // strictly inside (0,1): float sigmoid saturates exactly at the ends
      out[start + i] = std::clamp(static_cast<double>(p[i]), 1e-12, 1.0 - 1e-12);
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// gradient diagnostics (double instantiation)
// --------------------------------------------------------------------------

namespace {

double eval_loss(const MlpModelF64& model, const FeatureMatrix& x, std::span<const uint8_t> y,
                 LossKind loss, Workspace<double>& ws, std::vector<uint8_t>& yb) {
  const size_t n = x.rows;
  ws.resize(model, n);
  std::vector<size_t> rows(n);
  for (size_t i = 0; i < n; ++i) rows[i] = i;
  load_batch(x, rows, ws.activations[0]);
  yb.assign(y.begin(), y.end());
  return forward_batch(model, ws, n, yb.data(), loss);
}

}  // namespace

double mlp_loss(const MlpModelF64& model, const FeatureMatrix& x, std::span<const uint8_t> y,
                LossKind loss) {
  Workspace<double> ws;
  std::vector<uint8_t> yb;
  return eval_loss(model, x, y, loss, ws, yb);
}

std::vector<double> mlp_gradient(const MlpModelF64& model, const FeatureMatrix& x,
                                 std::span<const uint8_t> y, LossKind loss) {
  Workspace<double> ws;
  std::vector<uint8_t> yb;
  eval_loss(model, x, y, loss, ws, yb);
  backward_batch(model, ws, x.rows, yb.data());

  std::vector<double> flat;
  for (size_t l = 0; l < model.n_layers(); ++l) {
    flat.insert(flat.end(), ws.grad_w[l].begin(), ws.grad_w[l].end());
    flat.insert(flat.end(), ws.grad_b[l].begin(), ws.grad_b[l].end());
  }
  return flat;
}

double gradient_check(const MlpModelF64& model, const FeatureMatrix& x, std::span<const uint8_t> y,
                      LossKind loss, double fd_step) {
  if (x.rows == 0) return 0.0;  // empty batch: agreement by convention
  if (x.cols != model.n_inputs()) raise(Errc::ShapeMismatch, "batch width != model inputs");

  const std::vector<double> analytic = mlp_gradient(model, x, y, loss);

  MlpModelF64 probe = model;
  std::vector<double*> params;
  for (size_t l = 0; l < probe.n_layers(); ++l) {
    for (double& w : probe.weights[l]) params.push_back(&w);
    for (double& b : probe.biases[l]) params.push_back(&b);
  }

  double worst = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + fd_step;
    const double up = mlp_loss(probe, x, y, loss);
    *params[i] = saved - fd_step;
    const double down = mlp_loss(probe, x, y, loss);
    *params[i] = saved;
    const double numeric = (up - down) / (2 * fd_step);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

// --------------------------------------------------------------------------
// serialization
// --------------------------------------------------------------------------

void save_mlp(const MlpModel& model, std::ostream& out) {
  out.precision(9);
  out << "auditfair-mlp 1\n";
  out << "dims " << model.dims.size();
  for (int d : model.dims) out << " " << d;
  out << "\n";
  for (size_t l = 0; l < model.n_layers(); ++l) {
    out << "layer " << l << "\n";
    out << "w";
    for (float v : model.weights[l]) out << " " << v;
    out << "\nb";
    for (float v : model.biases[l]) out << " " << v;
    out << "\n";
  }
}

void save_mlp(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  save_mlp(model, out);
}

MlpModel load_mlp(std::istream& in) {
  auto fail = [](const std::string& what) -> void { raise(Errc::InvalidValue, "mlp file: " + what); };
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != "auditfair-mlp" || version != 1) fail("bad header");

  MlpModel m;
  size_t n_dims = 0;
  if (!(in >> key >> n_dims) || key != "dims" || n_dims < 2) fail("expected dims");
  m.dims.resize(n_dims);
  for (int& d : m.dims)
    if (!(in >> d)) fail("truncated dims");

  for (size_t l = 0; l + 1 < n_dims; ++l) {
    size_t index = 0;
    if (!(in >> key >> index) || key != "layer" || index != l) fail("expected layer");
    std::vector<float> w(static_cast<size_t>(m.dims[l]) * static_cast<size_t>(m.dims[l + 1]));
    std::vector<float> b(static_cast<size_t>(m.dims[l + 1]));
    if (!(in >> key) || key != "w") fail("expected w");
    for (float& v : w)
      if (!(in >> v)) fail("truncated weights");
    if (!(in >> key) || key != "b") fail("expected b");
    for (float& v : b)
      if (!(in >> v)) fail("truncated biases");
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

MlpModel load_mlp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open '" + path + "'");
  return load_mlp(in);
}

}  // namespace auditfair
