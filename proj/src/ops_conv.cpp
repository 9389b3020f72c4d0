#include <Eigen/Core>
#include <cstring>

#include "fhdr/autodiff.hpp"
#include "fhdr/errors.hpp"

namespace fhdr {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::size_t cin, cout, kh, kw, h, w, oh, ow, stride, pad;
  std::size_t k() const { return cin * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

ConvGeometry check_conv(const Tensor& x, const Tensor& wt, const Tensor& b, ad::Conv2dOptions o) {
  const Shape& xs = x.shape();
  const Shape& ws = wt.shape();
  if (o.stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels but kernel " + ws.str() + " expects " +
                     std::to_string(ws.c));
  }
  if (b.shape() != Shape{1, ws.n, 1, 1}) {
    throw ShapeError("conv2d: bias " + b.shape().str() + " does not match " + std::to_string(ws.n) + " output channels");
  }
  const std::size_t ph = xs.h + 2 * o.pad, pw = xs.w + 2 * o.pad;
  if (ph < ws.h || pw < ws.w || ws.h == 0 || ws.w == 0) {
    throw GeometryError("conv2d: padded input " + std::to_string(ph) + "x" + std::to_string(pw) +
                        " smaller than kernel " + ws.str());
  }
  ConvGeometry g{xs.c, ws.n, ws.h, ws.w, xs.h, xs.w, (ph - ws.h) / o.stride + 1, (pw - ws.w) / o.stride + 1,
                 o.stride, o.pad};
  if (g.oh == 0 || g.ow == 0 || xs.n == 0) throw GeometryError("conv2d: zero-extent output");
  return g;
}

// cols is (cin*kh*kw) x (oh*ow), row-major.
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t p = g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* xc = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * p;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          double* dst = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::memset(dst, 0, g.ow * sizeof(double));
            continue;
          }
          const double* src = xc + iy * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
  const std::size_t p = g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    double* xc = dx + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * p;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* dst = xc + iy * g.w;
          const double* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& x, const Tensor& wt, const Tensor& b, const ConvGeometry& g) {
  const std::size_t batch = x.shape().n;
  Tensor out({batch, g.cout, g.oh, g.ow});
  RowMat cols(g.k(), g.p());
  ConstMapMat wm(wt.raw(), g.cout, g.k());
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.plane(n, 0), g, cols.data());
    MapMat om(out.plane(n, 0), g.cout, g.p());
    om.noalias() = wm * cols;
    for (std::size_t o = 0; o < g.cout; ++o) om.row(o).array() += b.raw()[o];
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ad::Conv2dOptions opts) {
  return conv_forward(input, weight, bias, check_conv(input, weight, bias, opts));
}

namespace ad {

Var conv2d(Var input, Var weight, Var bias, Conv2dOptions opts) {
  Graph& gr = graph_of({input, weight, bias});
  const ConvGeometry geo = check_conv(input.value(), weight.value(), bias.value(), opts);
  Tensor out = conv_forward(input.value(), weight.value(), bias.value(), geo);
  return gr.record(OpTag::conv2d, std::move(out), {input.id, weight.id, bias.id}, [geo](Graph& g, std::size_t self) {
    const auto& ins = g.inputs(Var{&g, self});
    const Tensor& up = g.upstream(self);
    const Tensor& x = g.node_value(ins[0]);
    const Tensor& wt = g.node_value(ins[1]);
    const bool need_x = g.node_requires_grad(ins[0]);
    const bool need_w = g.node_requires_grad(ins[1]);
    const bool need_b = g.node_requires_grad(ins[2]);
    const std::size_t batch = x.shape().n;

    if (need_b) {
      Tensor& gb = g.grad_buffer(ins[2]);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < geo.cout; ++o) {
          const double* u = up.plane(n, o);
          double s = 0.0;
          for (std::size_t i = 0; i < geo.p(); ++i) s += u[i];
          gb.raw()[o] += s;
        }
    }
    if (!need_x && !need_w) return;

    RowMat cols(geo.k(), geo.p());
    ConstMapMat wm(wt.raw(), geo.cout, geo.k());
    for (std::size_t n = 0; n < batch; ++n) {
      ConstMapMat um(up.plane(n, 0), geo.cout, geo.p());
      if (need_w) {
        im2col(x.plane(n, 0), geo, cols.data());
        MapMat gw(g.grad_buffer(ins[1]).raw(), geo.cout, geo.k());
        gw.noalias() += um * cols.transpose();
      }
      if (need_x) {
        cols.noalias() = wm.transpose() * um;
        col2im_add(cols.data(), geo, g.grad_buffer(ins[0]).plane(n, 0));
      }
    }
  });
}

}  // namespace ad
}  // namespace fhdr
