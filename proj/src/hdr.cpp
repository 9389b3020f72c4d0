#include "fhdr/hdr.hpp"

#include <algorithm>
#include <cmath>

#include "fhdr/errors.hpp"

namespace fhdr {

void BracketSample::validate() const {
  const Shape& s = ldr[0].shape();
  if (s.n != 1 || s.c == 0 || s.h == 0 || s.w == 0) throw ShapeError(name + ": LDR frames must be (1,C,H,W), got " + s.str());
  for (const Tensor& l : ldr) {
    if (l.shape() != s) throw ShapeError(name + ": LDR frames disagree in shape");
    for (double v : l.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(name + ": LDR value outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(exposure[i] > 0.0) || !std::isfinite(exposure[i])) throw ConfigError(name + ": exposure times must be positive");
    if (i > 0 && !(exposure[i] > exposure[i - 1])) throw ConfigError(name + ": exposure times must strictly increase");
  }
  if (gt_hdr) {
    if (gt_hdr->shape() != s) throw ShapeError(name + ": ground truth shape " + gt_hdr->shape().str() + " != " + s.str());
    for (double v : gt_hdr->data()) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name + ": ground truth must be finite and non-negative");
    }
  }
}

Tensor gamma_to_linear(const Tensor& ldr, double exposure, double gamma) {
  if (!(exposure > 0.0)) throw ConfigError("gamma_to_linear: exposure time must be positive");
  if (!(gamma > 0.0)) throw ConfigError("gamma_to_linear: gamma must be positive");
  Tensor out(ldr.shape());
  for (std::size_t i = 0; i < ldr.numel(); ++i) out.data()[i] = std::pow(ldr.data()[i], gamma) / exposure;
  return out;
}

std::array<Tensor, 3> build_input(const BracketSample& sample, double gamma) {
  sample.validate();
  std::array<Tensor, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor pair[] = {sample.ldr[i], gamma_to_linear(sample.ldr[i], sample.exposure[i], gamma)};
    out[i] = concat_channels(pair);
  }
  return out;
}

namespace {
void check_mu(double mu) {
  if (!(mu > 0.0)) throw ConfigError("mu-law: mu must be positive");
}
}  // namespace

double mu_law(double h, double mu) {
  check_mu(mu);
  return std::log1p(mu * h) / std::log1p(mu);
}

double mu_law_derivative(double h, double mu) {
  check_mu(mu);
  return mu / ((1.0 + mu * h) * std::log1p(mu));
}

Tensor mu_law(const Tensor& h, double mu) {
  check_mu(mu);
  const double denom = std::log1p(mu);
  Tensor out(h.shape());
  for (std::size_t i = 0; i < h.numel(); ++i) out.data()[i] = std::log1p(mu * std::max(h.data()[i], 0.0)) / denom;
  return out;
}

namespace {

// Sobel taps as (positive side, negative side) with weights 1,2,1.
void sobel_plane(const double* src, std::size_t h, std::size_t w, SobelAxis axis, double* dst) {
  auto at = [&](long y, long x) {
    y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
    return src[y * w + x];
  };
  for (long y = 0; y < static_cast<long>(h); ++y) {
    for (long x = 0; x < static_cast<long>(w); ++x) {
      double pos, neg;
      if (axis == SobelAxis::x) {
        pos = at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1);
        neg = at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1);
      } else {
        pos = at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1);
        neg = at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1);
      }
      dst[y * w + x] = pos - neg;
    }
  }
}

// Adjoint of sobel_plane: scatters `up` back through the replicated taps.
void sobel_plane_adjoint(const double* up, std::size_t h, std::size_t w, SobelAxis axis, double* dst) {
  auto add = [&](long y, long x, double v) {
    y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
    dst[y * w + x] += v;
  };
  for (long y = 0; y < static_cast<long>(h); ++y) {
    for (long x = 0; x < static_cast<long>(w); ++x) {
      const double u = up[y * w + x];
      if (u == 0.0) continue;
      for (long d = -1; d <= 1; ++d) {
        const double wt = d == 0 ? 2.0 : 1.0;
        if (axis == SobelAxis::x) {
          add(y + d, x + 1, wt * u);
          add(y + d, x - 1, -wt * u);
        } else {
          add(y + 1, x + d, wt * u);
          add(y - 1, x + d, -wt * u);
        }
      }
    }
  }
}

}  // namespace

Tensor sobel(const Tensor& x, SobelAxis axis) {
  const Shape& s = x.shape();
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) sobel_plane(x.plane(n, c), s.h, s.w, axis, out.plane(n, c));
  return out;
}

namespace ad {

Var mu_law(Var h, double mu) {
  check_mu(mu);
  Graph& g = graph_of({h});
  Tensor out = fhdr::mu_law(h.value(), mu);
  return g.record(OpTag::mu_law, std::move(out), {h.id}, [mu](Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(Var{&gr, self})[0];
    const Tensor& up = gr.upstream(self);
    const Tensor& x = gr.node_value(in);
    Tensor& gx = gr.grad_buffer(in);
    const double denom = std::log1p(mu);
    for (std::size_t i = 0; i < up.numel(); ++i) {
      // Negative inputs are clamped in the forward pass.
      if (x.data()[i] < 0.0) continue;
      gx.data()[i] += up.data()[i] * mu / ((1.0 + mu * x.data()[i]) * denom);
    }
  });
}

Var sobel(Var x, SobelAxis axis) {
  Graph& g = graph_of({x});
  Tensor out = fhdr::sobel(x.value(), axis);
  return g.record(OpTag::sobel, std::move(out), {x.id}, [axis](Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(Var{&gr, self})[0];
    const Tensor& up = gr.upstream(self);
    const Shape& s = up.shape();
    Tensor& gx = gr.grad_buffer(in);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) sobel_plane_adjoint(up.plane(n, c), s.h, s.w, axis, gx.plane(n, c));
  });
}

namespace {
void check_loss_operands(Var pred, Var gt, const char* op) {
  graph_of({pred, gt});
  require_same_shape(pred.value(), gt.value(), op);
}
}  // namespace

Var reconstruction_loss(Var pred, Var gt, double mu) {
  check_loss_operands(pred, gt, "reconstruction_loss");
  const Var tp = mu_law(clamp_min(pred, 0.0), mu);
  const Var tg = mu_law(clamp_min(gt, 0.0), mu);
  return mean(abs(sub(tp, tg)));
}

Var sobel_loss(Var pred, Var gt, double mu) {
  check_loss_operands(pred, gt, "sobel_loss");
  const Var tp = mu_law(clamp_min(pred, 0.0), mu);
  const Var tg = mu_law(clamp_min(gt, 0.0), mu);
  const Var lx = mean(abs(sub(sobel(tp, SobelAxis::x), sobel(tg, SobelAxis::x))));
  const Var ly = mean(abs(sub(sobel(tp, SobelAxis::y), sobel(tg, SobelAxis::y))));
  return add(lx, ly);
}

Var total_loss(Var pred, Var gt, double lambda, double mu) {
  if (!(lambda >= 0.0)) throw ConfigError("total_loss: lambda must be non-negative");
  const Var rec = reconstruction_loss(pred, gt, mu);
  if (lambda == 0.0) return rec;
  return add(rec, scale(sobel_loss(pred, gt, mu), lambda));
}

}  // namespace ad

double reconstruction_loss(const Tensor& pred, const Tensor& gt, double mu) {
  ad::Graph g;
  return ad::reconstruction_loss(g.constant(pred), g.constant(gt), mu).value().item();
}

double sobel_loss(const Tensor& pred, const Tensor& gt, double mu) {
  ad::Graph g;
  return ad::sobel_loss(g.constant(pred), g.constant(gt), mu).value().item();
}

double total_loss(const Tensor& pred, const Tensor& gt, double lambda, double mu) {
  ad::Graph g;
  return ad::total_loss(g.constant(pred), g.constant(gt), lambda, mu).value().item();
}

Tensor triangle_merge(const BracketSample& sample, double gamma) {
  sample.validate();
  const Shape& s = sample.shape();
  std::array<Tensor, 3> lin;
  for (std::size_t i = 0; i < 3; ++i) lin[i] = gamma_to_linear(sample.ldr[i], sample.exposure[i], gamma);
  Tensor out(s);
  for (std::size_t k = 0; k < out.numel(); ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double l = sample.ldr[i].data()[k];
      const double wgt = 1.0 - std::abs(2.0 * l - 1.0);
      num += wgt * lin[i].data()[k];
      den += wgt;
    }
    if (den > 0.0) {
      out.data()[k] = num / den;
    } else {
      const std::size_t pick = sample.ldr[kReferenceFrame].data()[k] >= 0.5 ? 0 : 2;
      out.data()[k] = lin[pick].data()[k];
    }
  }
  return out;
}

}  // namespace fhdr
