#include "lesioncascade/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "lesioncascade/parallel.hpp"

namespace lc {

namespace {

constexpr double kLogClamp = 1e-12;

void check_defined(const Tensor& t, const char* op) { detail::require_defined(t, op); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not match");
  }
}

void check_rank(const Tensor& t, int rank, const char* op, const char* arg) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + arg + " must have rank " +
                     std::to_string(rank) + ", got shape " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  check_same_shape(a, b, "add");
  auto out = detail::make_op_node(a.shape(), "add", {a.node, b.node});
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = a.node->values[i] + b.node->values[i];
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& self) {
      for (int k = 0; k < 2; ++k) {
        TensorNode& p = *self.parents[static_cast<std::size_t>(k)];
        if (!p.requires_grad) continue;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_defined(a, "sub");
  check_defined(b, "sub");
  check_same_shape(a, b, "sub");
  auto out = detail::make_op_node(a.shape(), "sub", {a.node, b.node});
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = a.node->values[i] - b.node->values[i];
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& self) {
      TensorNode& a = *self.parents[0];
      TensorNode& b = *self.parents[1];
      if (a.requires_grad) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) a.grad[i] += self.grad[i];
      }
      if (b.requires_grad) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) b.grad[i] -= self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  check_same_shape(a, b, "mul");
  auto out = detail::make_op_node(a.shape(), "mul", {a.node, b.node});
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = a.node->values[i] * b.node->values[i];
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& self) {
      TensorNode& a = *self.parents[0];
      TensorNode& b = *self.parents[1];
      if (a.requires_grad) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) a.grad[i] += self.grad[i] * b.values[i];
      }
      if (b.requires_grad) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) b.grad[i] += self.grad[i] * a.values[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& x, double factor) {
  check_defined(x, "scale");
  auto out = detail::make_op_node(x.shape(), "scale", {x.node});
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = factor * x.node->values[i];
  if (out->requires_grad) {
    out->backward_fn = [factor](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += factor * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& x) {
  check_defined(x, "sum");
  auto out = detail::make_op_node({}, "sum", {x.node});
  double acc = 0.0;
  for (double v : x.node->values) acc += v;
  out->values[0] = acc;
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double g = self.grad[0];
      for (double& gi : x.grad) gi += g;
    };
  }
  return Tensor(out);
}

Tensor mean(const Tensor& x) {
  check_defined(x, "mean");
  auto out = detail::make_op_node({}, "mean", {x.node});
  double acc = 0.0;
  for (double v : x.node->values) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  out->values[0] = acc * inv_n;
  if (out->requires_grad) {
    out->backward_fn = [inv_n](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double g = self.grad[0] * inv_n;
      for (double& gi : x.grad) gi += g;
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto out = detail::make_op_node(std::move(shape), "reshape", {x.node});
  out->values = x.node->values;
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor concat(const Tensor& a, const Tensor& b) {
  check_defined(a, "concat");
  check_defined(b, "concat");
  check_rank(a, 1, "concat", "a");
  check_rank(b, 1, "concat", "b");
  const std::int64_t na = a.numel();
  const std::int64_t nb = b.numel();
  auto out = detail::make_op_node({na + nb}, "concat", {a.node, b.node});
  std::copy(a.node->values.begin(), a.node->values.end(), out->values.begin());
  std::copy(b.node->values.begin(), b.node->values.end(),
            out->values.begin() + static_cast<std::ptrdiff_t>(na));
  if (out->requires_grad) {
    out->backward_fn = [na](TensorNode& self) {
      TensorNode& a = *self.parents[0];
      TensorNode& b = *self.parents[1];
      const std::size_t split = static_cast<std::size_t>(na);
      if (a.requires_grad) {
        for (std::size_t i = 0; i < split; ++i) a.grad[i] += self.grad[i];
      }
      if (b.requires_grad) {
        for (std::size_t i = split; i < self.grad.size(); ++i) b.grad[i - split] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor relu(const Tensor& x) {
  check_defined(x, "relu");
  auto out = detail::make_op_node(x.shape(), "relu", {x.node});
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.node->values[i];
    out->values[i] = v > 0.0 ? v : 0.0;
  }
  if (out->requires_grad) {
    // Subgradient at 0 is taken as 0.
    out->backward_fn = [](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (x.values[i] > 0.0) x.grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor tanh(const Tensor& x) {
  check_defined(x, "tanh");
  auto out = detail::make_op_node(x.shape(), "tanh", {x.node});
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = std::tanh(x.node->values[i]);
  if (out->requires_grad) {
    out->backward_fn = [](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double y = self.values[i];
        x.grad[i] += self.grad[i] * (1.0 - y * y);
      }
    };
  }
  return Tensor(out);
}

Tensor softmax(const Tensor& x, int axis) {
  check_defined(x, "softmax");
  const Shape& s = x.shape();
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("softmax: axis out of range for shape " + shape_str(s));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= s[static_cast<std::size_t>(i)];
  const std::int64_t n = s[static_cast<std::size_t>(axis)];

  auto out = detail::make_op_node(s, "softmax", {x.node});
  const double* xv = x.node->values.data();
  double* yv = out->values.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      double mx = xv[base];
      for (std::int64_t c = 1; c < n; ++c) mx = std::max(mx, xv[base + c * inner]);
      double denom = 0.0;
      for (std::int64_t c = 0; c < n; ++c) {
        const double e = std::exp(xv[base + c * inner] - mx);
        yv[base + c * inner] = e;
        denom += e;
      }
      const double inv = 1.0 / denom;
      for (std::int64_t c = 0; c < n; ++c) yv[base + c * inner] *= inv;
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [outer, inner, n](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double* y = self.values.data();
      const double* g = self.grad.data();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
          const std::int64_t base = o * n * inner + in;
          double dot = 0.0;
          for (std::int64_t c = 0; c < n; ++c) {
            const std::int64_t i = base + c * inner;
            dot += g[i] * y[i];
          }
          for (std::int64_t c = 0; c < n; ++c) {
            const std::int64_t i = base + c * inner;
            x.grad[i] += y[i] * (g[i] - dot);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_defined(x, "linear");
  check_defined(weight, "linear");
  check_defined(bias, "linear");
  check_rank(x, 2, "linear", "input");
  check_rank(weight, 2, "linear", "weight");
  check_rank(bias, 1, "linear", "bias");
  const std::int64_t N = x.dim(0);
  const std::int64_t Din = x.dim(1);
  const std::int64_t Dout = weight.dim(0);
  if (weight.dim(1) != Din) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
  if (bias.dim(0) != Dout) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) +
                     " incompatible with weight " + shape_str(weight.shape()));
  }
  auto out = detail::make_op_node({N, Dout}, "linear", {x.node, weight.node, bias.node});
  const double* xp = x.node->values.data();
  const double* wp = weight.node->values.data();
  const double* bp = bias.node->values.data();
  double* yp = out->values.data();
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t o = 0; o < Dout; ++o) {
      double acc = bp[o];
      const double* xr = xp + i * Din;
      const double* wr = wp + o * Din;
      for (std::int64_t d = 0; d < Din; ++d) acc += xr[d] * wr[d];
      yp[i * Dout + o] = acc;
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [N, Din, Dout](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      TensorNode& w = *self.parents[1];
      TensorNode& b = *self.parents[2];
      const double* g = self.grad.data();
      if (x.requires_grad) {
        for (std::int64_t i = 0; i < N; ++i) {
          for (std::int64_t o = 0; o < Dout; ++o) {
            const double go = g[i * Dout + o];
            const double* wr = w.values.data() + o * Din;
            double* gx = x.grad.data() + i * Din;
            for (std::int64_t d = 0; d < Din; ++d) gx[d] += go * wr[d];
          }
        }
      }
      if (w.requires_grad) {
        for (std::int64_t o = 0; o < Dout; ++o) {
          double* gw = w.grad.data() + o * Din;
          for (std::int64_t i = 0; i < N; ++i) {
            const double go = g[i * Dout + o];
            const double* xr = x.values.data() + i * Din;
            for (std::int64_t d = 0; d < Din; ++d) gw[d] += go * xr[d];
          }
        }
      }
      if (b.requires_grad) {
        for (std::int64_t o = 0; o < Dout; ++o) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < N; ++i) acc += g[i * Dout + o];
          b.grad[static_cast<std::size_t>(o)] += acc;
        }
      }
    };
  }
  return Tensor(out);
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  check_defined(x, "conv2d");
  check_defined(weight, "conv2d");
  check_defined(bias, "conv2d");
  check_rank(x, 4, "conv2d", "input");
  check_rank(weight, 4, "conv2d", "weight");
  check_rank(bias, 1, "conv2d", "bias");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");
  const std::int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Cout = weight.dim(0), KH = weight.dim(2), KW = weight.dim(3);
  if (weight.dim(1) != Cin) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
  if (bias.dim(0) != Cout) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) +
                     " incompatible with weight " + shape_str(weight.shape()));
  }
  const std::int64_t num_h = H + 2 * padding - KH;
  const std::int64_t num_w = W + 2 * padding - KW;
  if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " with kernel " +
                     shape_str(weight.shape()) + ", stride " + std::to_string(stride) +
                     ", padding " + std::to_string(padding) +
                     " does not produce an exact output size");
  }
  const std::int64_t OH = num_h / stride + 1;
  const std::int64_t OW = num_w / stride + 1;

  auto out = detail::make_op_node({N, Cout, OH, OW}, "conv2d",
                                  {x.node, weight.node, bias.node});
  {
    const double* xp = x.node->values.data();
    const double* wp = weight.node->values.data();
    const double* bp = bias.node->values.data();
    double* yp = out->values.data();
    const bool par = detail::parallel_enabled();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) collapse(2) if (par)
#endif
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t oc = 0; oc < Cout; ++oc) {
        double* oplane = yp + (n * Cout + oc) * OH * OW;
        const double bv = bp[oc];
        for (std::int64_t i = 0; i < OH * OW; ++i) oplane[i] = bv;
        for (std::int64_t ic = 0; ic < Cin; ++ic) {
          const double* xplane = xp + (n * Cin + ic) * H * W;
          const double* wplane = wp + (oc * Cin + ic) * KH * KW;
          for (std::int64_t kh = 0; kh < KH; ++kh) {
            for (std::int64_t kw = 0; kw < KW; ++kw) {
              const double wv = wplane[kh * KW + kw];
              for (std::int64_t oh = 0; oh < OH; ++oh) {
                const std::int64_t ih = oh * stride - padding + kh;
                if (ih < 0 || ih >= H) continue;
                const double* xrow = xplane + ih * W;
                double* orow = oplane + oh * OW;
                if (stride == 1) {
                  const std::int64_t shift = kw - padding;
                  const std::int64_t ow0 = std::max<std::int64_t>(0, -shift);
                  const std::int64_t ow1 = std::min(OW, W - shift);
                  for (std::int64_t ow = ow0; ow < ow1; ++ow) {
                    orow[ow] += wv * xrow[ow + shift];
                  }
                } else {
                  for (std::int64_t ow = 0; ow < OW; ++ow) {
                    const std::int64_t iw = ow * stride - padding + kw;
                    if (iw < 0 || iw >= W) continue;
                    orow[ow] += wv * xrow[iw];
                  }
                }
              }
            }
          }
        }
      }
    }
    (void)par;
  }

  if (out->requires_grad) {
    const int s = stride, p = padding;
    out->backward_fn = [N, Cin, H, W, Cout, KH, KW, OH, OW, s, p](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      TensorNode& w = *self.parents[1];
      TensorNode& b = *self.parents[2];
      const double* g = self.grad.data();
      const bool par = detail::parallel_enabled();
      if (b.requires_grad) {
        for (std::int64_t oc = 0; oc < Cout; ++oc) {
          double acc = 0.0;
          for (std::int64_t n = 0; n < N; ++n) {
            const double* gplane = g + (n * Cout + oc) * OH * OW;
            for (std::int64_t i = 0; i < OH * OW; ++i) acc += gplane[i];
          }
          b.grad[static_cast<std::size_t>(oc)] += acc;
        }
      }
      if (w.requires_grad) {
        const double* xp = x.values.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
        for (std::int64_t oc = 0; oc < Cout; ++oc) {
          for (std::int64_t n = 0; n < N; ++n) {
            const double* gplane = g + (n * Cout + oc) * OH * OW;
            for (std::int64_t ic = 0; ic < Cin; ++ic) {
              const double* xplane = xp + (n * Cin + ic) * H * W;
              double* gw = w.grad.data() + (oc * Cin + ic) * KH * KW;
              for (std::int64_t kh = 0; kh < KH; ++kh) {
                for (std::int64_t kw = 0; kw < KW; ++kw) {
                  double acc = 0.0;
                  for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const std::int64_t ih = oh * s - p + kh;
                    if (ih < 0 || ih >= H) continue;
                    const double* xrow = xplane + ih * W;
                    const double* grow = gplane + oh * OW;
                    if (s == 1) {
                      const std::int64_t shift = kw - p;
                      const std::int64_t ow0 = std::max<std::int64_t>(0, -shift);
                      const std::int64_t ow1 = std::min(OW, W - shift);
                      for (std::int64_t ow = ow0; ow < ow1; ++ow) {
                        acc += grow[ow] * xrow[ow + shift];
                      }
                    } else {
                      for (std::int64_t ow = 0; ow < OW; ++ow) {
                        const std::int64_t iw = ow * s - p + kw;
                        if (iw < 0 || iw >= W) continue;
                        acc += grow[ow] * xrow[iw];
                      }
                    }
                  }
                  gw[kh * KW + kw] += acc;
                }
              }
            }
          }
        }
      }
      if (x.requires_grad) {
        const double* wp = w.values.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
        for (std::int64_t ic = 0; ic < Cin; ++ic) {
          for (std::int64_t n = 0; n < N; ++n) {
            double* gxplane = x.grad.data() + (n * Cin + ic) * H * W;
            for (std::int64_t oc = 0; oc < Cout; ++oc) {
              const double* gplane = g + (n * Cout + oc) * OH * OW;
              const double* wplane = wp + (oc * Cin + ic) * KH * KW;
              for (std::int64_t kh = 0; kh < KH; ++kh) {
                for (std::int64_t kw = 0; kw < KW; ++kw) {
                  const double wv = wplane[kh * KW + kw];
                  for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const std::int64_t ih = oh * s - p + kh;
                    if (ih < 0 || ih >= H) continue;
                    double* gxrow = gxplane + ih * W;
                    const double* grow = gplane + oh * OW;
                    if (s == 1) {
                      const std::int64_t shift = kw - p;
                      const std::int64_t ow0 = std::max<std::int64_t>(0, -shift);
                      const std::int64_t ow1 = std::min(OW, W - shift);
                      for (std::int64_t ow = ow0; ow < ow1; ++ow) {
                        gxrow[ow + shift] += wv * grow[ow];
                      }
                    } else {
                      for (std::int64_t ow = 0; ow < OW; ++ow) {
                        const std::int64_t iw = ow * s - p + kw;
                        if (iw < 0 || iw >= W) continue;
                        gxrow[iw] += wv * grow[ow];
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
      (void)par;
    };
  }
  return Tensor(out);
}

Tensor upsample_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  check_defined(x, "upsample_bilinear");
  if (x.rank() < 2) {
    throw ShapeError("upsample_bilinear: input must have rank >= 2, got " +
                     shape_str(x.shape()));
  }
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("upsample_bilinear: output size must be positive");
  }
  const Shape& s = x.shape();
  const std::int64_t H = s[s.size() - 2];
  const std::int64_t W = s[s.size() - 1];
  const std::int64_t C = x.numel() / (H * W);
  Shape out_shape = s;
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;

  // Corner-aligned source coordinates, precomputed per output row/column.
  struct Lerp {
    std::int64_t lo, hi;
    double w_hi;
  };
  auto build = [](std::int64_t out_n, std::int64_t in_n) {
    std::vector<Lerp> v(static_cast<std::size_t>(out_n));
    const double step =
        out_n > 1 ? static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1) : 0.0;
    for (std::int64_t i = 0; i < out_n; ++i) {
      const double src = step * static_cast<double>(i);
      std::int64_t lo = static_cast<std::int64_t>(src);
      if (lo > in_n - 1) lo = in_n - 1;
      const std::int64_t hi = std::min(lo + 1, in_n - 1);
      v[static_cast<std::size_t>(i)] = {lo, hi, src - static_cast<double>(lo)};
    }
    return v;
  };
  const std::vector<Lerp> rows = build(out_h, H);
  const std::vector<Lerp> cols = build(out_w, W);

  auto out = detail::make_op_node(std::move(out_shape), "upsample_bilinear", {x.node});
  {
    const double* xp = x.node->values.data();
    double* yp = out->values.data();
    for (std::int64_t c = 0; c < C; ++c) {
      const double* xplane = xp + c * H * W;
      double* yplane = yp + c * out_h * out_w;
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        const Lerp& ry = rows[static_cast<std::size_t>(oy)];
        const double* r0 = xplane + ry.lo * W;
        const double* r1 = xplane + ry.hi * W;
        double* orow = yplane + oy * out_w;
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          const Lerp& rx = cols[static_cast<std::size_t>(ox)];
          const double top = r0[rx.lo] + (r0[rx.hi] - r0[rx.lo]) * rx.w_hi;
          const double bot = r1[rx.lo] + (r1[rx.hi] - r1[rx.lo]) * rx.w_hi;
          orow[ox] = top + (bot - top) * ry.w_hi;
        }
      }
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [C, H, W, out_h, out_w, rows, cols](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double* g = self.grad.data();
      for (std::int64_t c = 0; c < C; ++c) {
        double* gxplane = x.grad.data() + c * H * W;
        const double* gplane = g + c * out_h * out_w;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
          const Lerp& ry = rows[static_cast<std::size_t>(oy)];
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const Lerp& rx = cols[static_cast<std::size_t>(ox)];
            const double go = gplane[oy * out_w + ox];
            const double wy1 = ry.w_hi, wy0 = 1.0 - ry.w_hi;
            const double wx1 = rx.w_hi, wx0 = 1.0 - rx.w_hi;
            gxplane[ry.lo * W + rx.lo] += go * wy0 * wx0;
            gxplane[ry.lo * W + rx.hi] += go * wy0 * wx1;
            gxplane[ry.hi * W + rx.lo] += go * wy1 * wx0;
            gxplane[ry.hi * W + rx.hi] += go * wy1 * wx1;
          }
        }
      }
    };
  }
  return Tensor(out);
}

namespace {

// Shared core for both cross-entropy entry points. Rows are indexed by
// (row, class) through `index(row, c)`.
Tensor nll_impl(const Tensor& x, const std::vector<std::int64_t>& targets,
                bool from_logits, std::int64_t num_rows, std::int64_t num_classes,
                std::int64_t class_stride, std::int64_t row_stride, const char* op) {
  if (static_cast<std::int64_t>(targets.size()) != num_rows) {
    throw ShapeError(std::string(op) + ": got " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(num_rows) + " rows");
  }
  for (std::int64_t t : targets) {
    if (t < 0 || t >= num_classes) {
      throw std::out_of_range(std::string(op) + ": class index " + std::to_string(t) +
                              " out of range [0," + std::to_string(num_classes) + ")");
    }
  }
  auto out = detail::make_op_node({}, op, {x.node});
  const double* xp = x.node->values.data();
  const double inv_n = 1.0 / static_cast<double>(num_rows);
  double acc = 0.0;
  if (from_logits) {
    for (std::int64_t i = 0; i < num_rows; ++i) {
      const double* row = xp + i * row_stride;
      double mx = row[0];
      for (std::int64_t c = 1; c < num_classes; ++c) mx = std::max(mx, row[c * class_stride]);
      double denom = 0.0;
      for (std::int64_t c = 0; c < num_classes; ++c) denom += std::exp(row[c * class_stride] - mx);
      acc += mx + std::log(denom) - row[targets[static_cast<std::size_t>(i)] * class_stride];
    }
  } else {
    for (std::int64_t i = 0; i < num_rows; ++i) {
      const double p = xp[i * row_stride + targets[static_cast<std::size_t>(i)] * class_stride];
      acc -= std::log(std::max(p, kLogClamp));
    }
  }
  out->values[0] = acc * inv_n;
  if (out->requires_grad) {
    out->backward_fn = [targets, from_logits, num_rows, num_classes, class_stride,
                        row_stride, inv_n](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double g = self.grad[0] * inv_n;
      const double* xp = x.values.data();
      if (from_logits) {
        for (std::int64_t i = 0; i < num_rows; ++i) {
          const double* row = xp + i * row_stride;
          double* grow = x.grad.data() + i * row_stride;
          double mx = row[0];
          for (std::int64_t c = 1; c < num_classes; ++c) mx = std::max(mx, row[c * class_stride]);
          double denom = 0.0;
          for (std::int64_t c = 0; c < num_classes; ++c) denom += std::exp(row[c * class_stride] - mx);
          const double inv_denom = 1.0 / denom;
          const std::int64_t t = targets[static_cast<std::size_t>(i)];
          for (std::int64_t c = 0; c < num_classes; ++c) {
            const double soft = std::exp(row[c * class_stride] - mx) * inv_denom;
            grow[c * class_stride] += g * (soft - (c == t ? 1.0 : 0.0));
          }
        }
      } else {
        for (std::int64_t i = 0; i < num_rows; ++i) {
          const std::int64_t t = targets[static_cast<std::size_t>(i)];
          const double p = std::max(xp[i * row_stride + t * class_stride], kLogClamp);
          x.grad[static_cast<std::size_t>(i * row_stride + t * class_stride)] -= g / p;
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor cross_entropy(const Tensor& x, const std::vector<std::int64_t>& targets,
                     bool from_logits) {
  check_defined(x, "cross_entropy");
  check_rank(x, 2, "cross_entropy", "input");
  return nll_impl(x, targets, from_logits, x.dim(0), x.dim(1),
                  /*class_stride=*/1, /*row_stride=*/x.dim(1), "cross_entropy");
}

Tensor pixel_cross_entropy(const Tensor& x, const std::vector<std::int64_t>& labels,
                           bool from_logits) {
  check_defined(x, "pixel_cross_entropy");
  check_rank(x, 3, "pixel_cross_entropy", "input");
  const std::int64_t C = x.dim(0);
  const std::int64_t P = x.dim(1) * x.dim(2);
  // Layout [C,H,W]: pixels are rows with stride 1, classes stride H*W.
  return nll_impl(x, labels, from_logits, P, C,
                  /*class_stride=*/P, /*row_stride=*/1, "pixel_cross_entropy");
}

Tensor channel_mean(const Tensor& x) {
  check_defined(x, "channel_mean");
  check_rank(x, 3, "channel_mean", "input");
  const std::int64_t K = x.dim(0);
  const std::int64_t P = x.dim(1) * x.dim(2);
  auto out = detail::make_op_node({K}, "channel_mean", {x.node});
  const double inv_p = 1.0 / static_cast<double>(P);
  const double* xp = x.node->values.data();
  for (std::int64_t k = 0; k < K; ++k) {
    double acc = 0.0;
    const double* plane = xp + k * P;
    for (std::int64_t i = 0; i < P; ++i) acc += plane[i];
    out->values[static_cast<std::size_t>(k)] = acc * inv_p;
  }
  if (out->requires_grad) {
    out->backward_fn = [K, P, inv_p](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      for (std::int64_t k = 0; k < K; ++k) {
        const double g = self.grad[static_cast<std::size_t>(k)] * inv_p;
        double* gplane = x.grad.data() + k * P;
        for (std::int64_t i = 0; i < P; ++i) gplane[i] += g;
      }
    };
  }
  return Tensor(out);
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
  check_defined(x, "channel_scale");
  check_defined(s, "channel_scale");
  check_rank(x, 3, "channel_scale", "input");
  check_rank(s, 1, "channel_scale", "scales");
  const std::int64_t K = x.dim(0);
  if (s.dim(0) != K) {
    throw ShapeError("channel_scale: scales " + shape_str(s.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
  const std::int64_t P = x.dim(1) * x.dim(2);
  auto out = detail::make_op_node(x.shape(), "channel_scale", {x.node, s.node});
  const double* xp = x.node->values.data();
  const double* sp = s.node->values.data();
  double* yp = out->values.data();
  for (std::int64_t k = 0; k < K; ++k) {
    const double sv = sp[k];
    for (std::int64_t i = 0; i < P; ++i) yp[k * P + i] = sv * xp[k * P + i];
  }
  if (out->requires_grad) {
    out->backward_fn = [K, P](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      TensorNode& s = *self.parents[1];
      const double* g = self.grad.data();
      if (x.requires_grad) {
        for (std::int64_t k = 0; k < K; ++k) {
          const double sv = s.values[static_cast<std::size_t>(k)];
          double* gx = x.grad.data() + k * P;
          const double* gk = g + k * P;
          for (std::int64_t i = 0; i < P; ++i) gx[i] += sv * gk[i];
        }
      }
      if (s.requires_grad) {
        for (std::int64_t k = 0; k < K; ++k) {
          double acc = 0.0;
          const double* gk = g + k * P;
          const double* xk = x.values.data() + k * P;
          for (std::int64_t i = 0; i < P; ++i) acc += gk[i] * xk[i];
          s.grad[static_cast<std::size_t>(k)] += acc;
        }
      }
    };
  }
  return Tensor(out);
}

Tensor weighted_sum(const Tensor& a, const Tensor& b, const Tensor& wa, const Tensor& wb) {
  check_defined(a, "weighted_sum");
  check_defined(b, "weighted_sum");
  check_defined(wa, "weighted_sum");
  check_defined(wb, "weighted_sum");
  check_same_shape(a, b, "weighted_sum");
  check_same_shape(wa, wb, "weighted_sum");
  const bool per_channel = wa.rank() == 1;
  if (!per_channel && wa.numel() != 1) {
    throw ShapeError("weighted_sum: weights must be scalars or rank-1 vectors, got " +
                     shape_str(wa.shape()));
  }
  std::int64_t K = 1, P = a.numel();
  if (per_channel) {
    if (a.rank() < 1 || a.dim(0) != wa.dim(0)) {
      throw ShapeError("weighted_sum: per-channel weights " + shape_str(wa.shape()) +
                       " incompatible with input " + shape_str(a.shape()));
    }
    K = a.dim(0);
    P = a.numel() / K;
  }
  auto out = detail::make_op_node(a.shape(), "weighted_sum",
                                  {a.node, b.node, wa.node, wb.node});
  {
    const double* ap = a.node->values.data();
    const double* bp = b.node->values.data();
    double* yp = out->values.data();
    for (std::int64_t k = 0; k < K; ++k) {
      const double va = wa.node->values[static_cast<std::size_t>(per_channel ? k : 0)];
      const double vb = wb.node->values[static_cast<std::size_t>(per_channel ? k : 0)];
      for (std::int64_t i = 0; i < P; ++i) {
        const std::int64_t j = k * P + i;
        yp[j] = va * ap[j] + vb * bp[j];
      }
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [per_channel, K, P](TensorNode& self) {
      TensorNode& a = *self.parents[0];
      TensorNode& b = *self.parents[1];
      TensorNode& wa = *self.parents[2];
      TensorNode& wb = *self.parents[3];
      const double* g = self.grad.data();
      for (std::int64_t k = 0; k < K; ++k) {
        const std::size_t wi = static_cast<std::size_t>(per_channel ? k : 0);
        const double va = wa.values[wi];
        const double vb = wb.values[wi];
        double acc_a = 0.0, acc_b = 0.0;
        for (std::int64_t i = 0; i < P; ++i) {
          const std::int64_t j = k * P + i;
          if (a.requires_grad) a.grad[static_cast<std::size_t>(j)] += va * g[j];
          if (b.requires_grad) b.grad[static_cast<std::size_t>(j)] += vb * g[j];
          acc_a += g[j] * a.values[static_cast<std::size_t>(j)];
          acc_b += g[j] * b.values[static_cast<std::size_t>(j)];
        }
        if (wa.requires_grad) wa.grad[wi] += acc_a;
        if (wb.requires_grad) wb.grad[wi] += acc_b;
      }
    };
  }
  return Tensor(out);
}

Tensor normalize_channels(const Tensor& x) {
  check_defined(x, "normalize_channels");
  check_rank(x, 3, "normalize_channels", "input");
  const std::int64_t C = x.dim(0);
  const std::int64_t P = x.dim(1) * x.dim(2);
  auto out = detail::make_op_node(x.shape(), "normalize_channels", {x.node});
  const double* xp = x.node->values.data();
  double* yp = out->values.data();
  for (std::int64_t i = 0; i < P; ++i) {
    double s = 0.0;
    for (std::int64_t c = 0; c < C; ++c) s += xp[c * P + i];
    const double inv = 1.0 / std::max(s, kLogClamp);
    for (std::int64_t c = 0; c < C; ++c) yp[c * P + i] = xp[c * P + i] * inv;
  }
  if (out->requires_grad) {
    out->backward_fn = [C, P](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double* xp = x.values.data();
      const double* y = self.values.data();
      const double* g = self.grad.data();
      for (std::int64_t i = 0; i < P; ++i) {
        double s = 0.0, dot = 0.0;
        for (std::int64_t c = 0; c < C; ++c) {
          s += xp[c * P + i];
          dot += g[c * P + i] * y[c * P + i];
        }
        const double inv = 1.0 / std::max(s, kLogClamp);
        for (std::int64_t c = 0; c < C; ++c) {
          x.grad[static_cast<std::size_t>(c * P + i)] += (g[c * P + i] - dot) * inv;
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace lc
