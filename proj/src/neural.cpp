#include "tosa/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tosa {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr const char* kCheckpointMagic = "tosa-qnet";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::size_t QNetworkParams::parameter_count(NetworkShape shape) {
  return QNetworkParams(shape).size();
}

QNetworkParams::QNetworkParams(NetworkShape shape) : shape_(shape) {
  if (shape.n_in == 0 || shape.n_h == 0 || shape.n_l == 0) {
    throw std::invalid_argument("QNetworkParams: n_in, n_h and n_l must be >= 1");
  }
  const std::size_t g = 3 * shape.n_h;
  std::size_t offset = 0;
  layers_.resize(shape.n_l);
  for (std::size_t l = 0; l < shape.n_l; ++l) {
    auto& lay = layers_[l];
    lay.in = l == 0 ? shape.n_in : shape.n_h;
    lay.w = offset;
    offset += g * lay.in;
    lay.u = offset;
    offset += g * shape.n_h;
    lay.b = offset;
    offset += g;
  }
  head_w_ = offset;
  offset += kNumActions * shape.n_h;
  head_b_ = offset;
  offset += kNumActions;
  values_.assign(offset, 0.0);
}

QNetworkParams QNetworkParams::initialize(NetworkShape shape, Rng& rng) {
  QNetworkParams p(shape);
  auto fill = [&](std::size_t begin, std::size_t count, double bound) {
    for (std::size_t i = 0; i < count; ++i) p.values_[begin + i] = rng.uniform(-bound, bound);
  };
  const std::size_t g = 3 * shape.n_h;
  const double recurrent_bound = std::sqrt(1.0 / static_cast<double>(shape.n_h));
  for (const auto& lay : p.layers_) {
    fill(lay.w, g * lay.in, std::sqrt(1.0 / static_cast<double>(lay.in)));
    fill(lay.u, g * shape.n_h, recurrent_bound);
    fill(lay.b, g, recurrent_bound);
  }
  fill(p.head_w_, kNumActions * shape.n_h, recurrent_bound);
  fill(p.head_b_, kNumActions, recurrent_bound);
  return p;
}

bool QNetworkParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

QFunction::QFunction(NetworkShape shape) : shape_(shape) {
  const std::size_t n = shape.n_l;
  z_.resize(n);
  r_.resize(n);
  c_.resize(n);
  h_.resize(n);
  rh_.resize(n);
}

std::size_t QFunction::check_window(const QNetworkParams& params,
                                    std::span<const double> window) const {
  if (!(params.shape() == shape_)) throw std::invalid_argument("QFunction: shape mismatch");
  if (window.empty() || window.size() % shape_.n_in != 0) {
    throw std::invalid_argument("QFunction: window must hold >= 1 vectors of length n_in");
  }
  return window.size() / shape_.n_in;
}

void QFunction::run_forward(const QNetworkParams& params, std::span<const double> window,
                            std::size_t steps) {
  const std::size_t nh = shape_.n_h;
  const double* theta = params.values().data();
  for (std::size_t l = 0; l < shape_.n_l; ++l) {
    const auto& lay = params.layer(l);
    const double* W = theta + lay.w;
    const double* U = theta + lay.u;
    const double* b = theta + lay.b;
    auto& z = z_[l];
    auto& r = r_[l];
    auto& c = c_[l];
    auto& h = h_[l];
    auto& rh = rh_[l];
    z.resize(steps * nh);
    r.resize(steps * nh);
    c.resize(steps * nh);
    h.resize(steps * nh);
    rh.resize(steps * nh);
    const double* input = l == 0 ? window.data() : h_[l - 1].data();
    for (std::size_t t = 0; t < steps; ++t) {
      const double* x = input + t * lay.in;
      const double* hp = t > 0 ? &h[(t - 1) * nh] : nullptr;
      double* zt = &z[t * nh];
      double* rt = &r[t * nh];
      double* ct = &c[t * nh];
      double* ht = &h[t * nh];
      double* rht = &rh[t * nh];
      for (std::size_t j = 0; j < nh; ++j) {
        const double* wz = W + j * lay.in;
        const double* wr = W + (nh + j) * lay.in;
        double az = b[j];
        double ar = b[nh + j];
        for (std::size_t i = 0; i < lay.in; ++i) {
          az += wz[i] * x[i];
          ar += wr[i] * x[i];
        }
        if (hp) {
          const double* uz = U + j * nh;
          const double* ur = U + (nh + j) * nh;
          for (std::size_t i = 0; i < nh; ++i) {
            az += uz[i] * hp[i];
            ar += ur[i] * hp[i];
          }
        }
        zt[j] = sigmoid(az);
        rt[j] = sigmoid(ar);
      }
      for (std::size_t j = 0; j < nh; ++j) rht[j] = hp ? rt[j] * hp[j] : 0.0;
      for (std::size_t j = 0; j < nh; ++j) {
        const double* wc = W + (2 * nh + j) * lay.in;
        double ac = b[2 * nh + j];
        for (std::size_t i = 0; i < lay.in; ++i) ac += wc[i] * x[i];
        if (hp) {
          const double* uc = U + (2 * nh + j) * nh;
          for (std::size_t i = 0; i < nh; ++i) ac += uc[i] * rht[i];
        }
        ct[j] = std::tanh(ac);
        const double prev = hp ? hp[j] : 0.0;
        ht[j] = (1.0 - zt[j]) * prev + zt[j] * ct[j];
      }
    }
  }
}

QValues QFunction::forward(const QNetworkParams& params, std::span<const double> window) {
  const std::size_t steps = check_window(params, window);
  run_forward(params, window, steps);
  const std::size_t nh = shape_.n_h;
  const double* theta = params.values().data();
  const double* top = &h_[shape_.n_l - 1][(steps - 1) * nh];
  QValues q{};
  for (std::size_t a = 0; a < kNumActions; ++a) {
    const double* wo = theta + params.head_w() + a * nh;
    double acc = theta[params.head_b() + a];
    for (std::size_t i = 0; i < nh; ++i) acc += wo[i] * top[i];
    q[a] = acc;
  }
  return q;
}

double QFunction::accumulate_gradient(const QNetworkParams& params,
                                      std::span<const double> window, std::size_t action,
                                      double td_target, double scale, std::span<double> grad) {
  if (action >= kNumActions) throw std::invalid_argument("QFunction: action out of range");
  if (grad.size() != params.size()) throw std::invalid_argument("QFunction: gradient size");
  const QValues q = forward(params, window);
  const std::size_t steps = window.size() / shape_.n_in;
  const std::size_t nh = shape_.n_h;
  const double* theta = params.values().data();
  double* g = grad.data();

  const double residual = q[action] - td_target;
  const double loss = 0.5 * residual * residual;
  const double dq = scale * residual;

  // Head. Only the selected action's row receives gradient.
  const double* top_last = &h_[shape_.n_l - 1][(steps - 1) * nh];
  const double* wo = theta + params.head_w() + action * nh;
  double* gwo = g + params.head_w() + action * nh;
  for (std::size_t i = 0; i < nh; ++i) gwo[i] += dq * top_last[i];
  g[params.head_b() + action] += dq;

  // dh_ holds dLoss/dh_t for the current layer's outputs, [steps x nh].
  dh_.assign(steps * nh, 0.0);
  for (std::size_t i = 0; i < nh; ++i) dh_[(steps - 1) * nh + i] = dq * wo[i];

  dh_next_.resize(nh);
  daz_.resize(nh);
  dar_.resize(nh);
  dac_.resize(nh);
  drh_.resize(nh);

  for (std::size_t l = shape_.n_l; l-- > 0;) {
    const auto& lay = params.layer(l);
    const double* W = theta + lay.w;
    const double* U = theta + lay.u;
    double* gW = g + lay.w;
    double* gU = g + lay.u;
    double* gb = g + lay.b;
    const auto& z = z_[l];
    const auto& r = r_[l];
    const auto& c = c_[l];
    const auto& h = h_[l];
    const auto& rh = rh_[l];
    const double* input = l == 0 ? window.data() : h_[l - 1].data();
    const bool need_dx = l > 0;
    if (need_dx) dx_.assign(steps * lay.in, 0.0);
    std::fill(dh_next_.begin(), dh_next_.end(), 0.0);

    for (std::size_t t = steps; t-- > 0;) {
      const double* x = input + t * lay.in;
      const double* hp = t > 0 ? &h[(t - 1) * nh] : nullptr;
      const double* zt = &z[t * nh];
      const double* rt = &r[t * nh];
      const double* ct = &c[t * nh];
      const double* rht = &rh[t * nh];
      const double* dh_out = &dh_[t * nh];

      // dh_next_ becomes dLoss/dh_{t-1} as it is built.
      for (std::size_t j = 0; j < nh; ++j) {
        const double dh = dh_out[j] + dh_next_[j];
        const double prev = hp ? hp[j] : 0.0;
        const double dc = dh * zt[j];
        const double dz = dh * (ct[j] - prev);
        dac_[j] = dc * (1.0 - ct[j] * ct[j]);
        daz_[j] = dz * zt[j] * (1.0 - zt[j]);
        dh_next_[j] = dh * (1.0 - zt[j]);
      }
      if (hp) {
        std::fill(drh_.begin(), drh_.end(), 0.0);
        for (std::size_t j = 0; j < nh; ++j) {
          const double* uc = U + (2 * nh + j) * nh;
          double* guc = gU + (2 * nh + j) * nh;
          const double d = dac_[j];
          for (std::size_t i = 0; i < nh; ++i) {
            drh_[i] += uc[i] * d;
            guc[i] += d * rht[i];
          }
        }
        for (std::size_t j = 0; j < nh; ++j) {
          const double dr = drh_[j] * hp[j];
          dh_next_[j] += drh_[j] * rt[j];
          dar_[j] = dr * rt[j] * (1.0 - rt[j]);
        }
        for (std::size_t j = 0; j < nh; ++j) {
          const double* uz = U + j * nh;
          const double* ur = U + (nh + j) * nh;
          double* guz = gU + j * nh;
          double* gur = gU + (nh + j) * nh;
          const double dz = daz_[j];
          const double dr = dar_[j];
          for (std::size_t i = 0; i < nh; ++i) {
            guz[i] += dz * hp[i];
            gur[i] += dr * hp[i];
            dh_next_[i] += uz[i] * dz + ur[i] * dr;
          }
        }
      } else {
        std::fill(dar_.begin(), dar_.end(), 0.0);
      }

      for (std::size_t j = 0; j < nh; ++j) {
        gb[j] += daz_[j];
        gb[nh + j] += dar_[j];
        gb[2 * nh + j] += dac_[j];
        double* gwz = gW + j * lay.in;
        double* gwr = gW + (nh + j) * lay.in;
        double* gwc = gW + (2 * nh + j) * lay.in;
        for (std::size_t i = 0; i < lay.in; ++i) {
          gwz[i] += daz_[j] * x[i];
          gwr[i] += dar_[j] * x[i];
          gwc[i] += dac_[j] * x[i];
        }
      }
      if (need_dx) {
        double* dx = &dx_[t * lay.in];
        for (std::size_t j = 0; j < nh; ++j) {
          const double* wz = W + j * lay.in;
          const double* wr = W + (nh + j) * lay.in;
          const double* wc = W + (2 * nh + j) * lay.in;
          for (std::size_t i = 0; i < lay.in; ++i) {
            dx[i] += wz[i] * daz_[j] + wr[i] * dar_[j] + wc[i] * dac_[j];
          }
        }
      }
    }
    if (need_dx) dh_.swap(dx_);
  }
  return loss;
}

QValues forward(const QNetworkParams& params, std::span<const double> window) {
  QFunction fn(params.shape());
  return fn.forward(params, window);
}

std::vector<double> backward(const QNetworkParams& params, std::span<const double> window,
                             std::size_t action, double td_target) {
  QFunction fn(params.shape());
  std::vector<double> grad(params.size(), 0.0);
  fn.accumulate_gradient(params, window, action, td_target, 1.0, grad);
  return grad;
}

void rmsprop_step(QNetworkParams& params, OptimizerState& state,
                  std::span<const double> gradient) {
  auto theta = params.values();
  if (gradient.size() != theta.size() || state.accumulator.size() != theta.size()) {
    throw std::invalid_argument("rmsprop_step: shape mismatch");
  }
  const auto& cfg = state.config;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = gradient[i];
    double& acc = state.accumulator[i];
    acc = cfg.decay * acc + (1.0 - cfg.decay) * g * g;
    theta[i] -= cfg.learning_rate * g / (std::sqrt(acc) + cfg.epsilon);
  }
}

void save_checkpoint(std::ostream& out, const QNetworkParams& params) {
  const auto& s = params.shape();
  const std::size_t nh = s.n_h;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "n_in " << s.n_in << " n_h " << s.n_h << " n_l " << s.n_l << '\n';
  const auto values = params.values();
  char buf[64];
  auto block = [&](const std::string& name, std::size_t offset, std::size_t rows,
                   std::size_t cols) {
    out << name << ' ' << rows << ' ' << cols << '\n';
    for (std::size_t rr = 0; rr < rows; ++rr) {
      for (std::size_t cc = 0; cc < cols; ++cc) {
        std::snprintf(buf, sizeof buf, "%.17g", values[offset + rr * cols + cc]);
        out << (cc ? " " : "") << buf;
      }
      out << '\n';
    }
  };
  for (std::size_t l = 0; l < s.n_l; ++l) {
    const auto& lay = params.layer(l);
    const std::string prefix = "gru" + std::to_string(l) + ".";
    block(prefix + "W", lay.w, 3 * nh, lay.in);
    block(prefix + "U", lay.u, 3 * nh, nh);
    block(prefix + "b", lay.b, 3 * nh, 1);
  }
  block("head.W", params.head_w(), kNumActions, nh);
  block("head.b", params.head_b(), kNumActions, 1);
}

QNetworkParams load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw std::runtime_error("load_checkpoint: not a Q-network checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  }
  NetworkShape shape;
  std::string k1, k2, k3;
  if (!(in >> k1 >> shape.n_in >> k2 >> shape.n_h >> k3 >> shape.n_l) || k1 != "n_in" ||
      k2 != "n_h" || k3 != "n_l") {
    throw std::runtime_error("load_checkpoint: malformed shape header");
  }
  QNetworkParams params(shape);
  auto values = params.values();
  auto block = [&](const std::string& name, std::size_t offset, std::size_t rows,
                   std::size_t cols) {
    std::string got;
    std::size_t gr = 0, gc = 0;
    if (!(in >> got >> gr >> gc) || got != name || gr != rows || gc != cols) {
      throw std::runtime_error("load_checkpoint: expected tensor " + name);
    }
    for (std::size_t i = 0; i < rows * cols; ++i) {
      if (!(in >> values[offset + i])) {
        throw std::runtime_error("load_checkpoint: truncated tensor " + name);
      }
    }
  };
  const std::size_t nh = shape.n_h;
  for (std::size_t l = 0; l < shape.n_l; ++l) {
    const auto& lay = params.layer(l);
    const std::string prefix = "gru" + std::to_string(l) + ".";
    block(prefix + "W", lay.w, 3 * nh, lay.in);
    block(prefix + "U", lay.u, 3 * nh, nh);
    block(prefix + "b", lay.b, 3 * nh, 1);
  }
  block("head.W", params.head_w(), kNumActions, nh);
  block("head.b", params.head_b(), kNumActions, 1);
  return params;
}

}  // namespace tosa
