#include "ssc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssc/parallel.hpp"

namespace ssc::nn {

namespace {

std::shared_ptr<TensorNode> new_node(std::vector<std::int64_t> shape) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values.assign(static_cast<std::size_t>(node->numel()), 0.0);
  return node;
}

void attach(const std::shared_ptr<TensorNode>& out, std::initializer_list<Tensor> inputs,
            std::function<void(TensorNode&)> fn) {
  if (!grad_enabled()) return;
  bool req = false;
  for (const auto& t : inputs) req = req || (t.defined() && t.requires_grad());
  if (!req) return;
  out->requires_grad = true;
  for (const auto& t : inputs)
    if (t.defined()) out->parents.push_back(t.node());
  out->backward_fn = std::move(fn);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ValidationError(std::string(op) + ": operand shapes differ");
}

std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p,
                          std::int64_t dil) {
  return (in + 2 * p - dil * (k - 1) - 1) / s + 1;
}

std::int64_t deconv_out_dim(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p,
                            std::int64_t dil) {
  return (in - 1) * s - 2 * p + dil * (k - 1) + 1;
}

// Range of output positions o for which o*stride + off lands in [0, limit).
void valid_out_range(std::int64_t off, std::int64_t stride, std::int64_t limit,
                     std::int64_t out_dim, std::int64_t& lo, std::int64_t& hi_excl) {
  lo = off < 0 ? (-off + stride - 1) / stride : 0;
  hi_excl = off >= limit ? 0 : std::min(out_dim, (limit - off + stride - 1) / stride);
  if (hi_excl < lo) hi_excl = lo;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = a.data()[i] + b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  attach(out, {a, b}, [an, bn](TensorNode& self) {
    const std::int64_t n = self.numel();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i];
    }
  });
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = a.data()[i] - b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  attach(out, {a, b}, [an, bn](TensorNode& self) {
    const std::int64_t n = self.numel();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) bn->grad[i] -= self.grad[i];
    }
  });
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = a.data()[i] * b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  attach(out, {a, b}, [an, bn](TensorNode& self) {
    const std::int64_t n = self.numel();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * bn->values[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i] * an->values[i];
    }
  });
  return Tensor(out);
}

Tensor add_scalar(const Tensor& a, double s) {
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = a.data()[i] + s;
  auto an = a.node();
  attach(out, {a}, [an](TensorNode& self) {
    an->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
  });
  return Tensor(out);
}

Tensor mul_scalar(const Tensor& a, double s) {
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = a.data()[i] * s;
  auto an = a.node();
  attach(out, {a}, [an, s](TensorNode& self) {
    an->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * s;
  });
  return Tensor(out);
}

Tensor exp(const Tensor& a) {
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = std::exp(a.data()[i]);
  auto an = a.node();
  attach(out, {a}, [an](TensorNode& self) {
    an->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * self.values[i];
  });
  return Tensor(out);
}

Tensor relu(const Tensor& a) {
  auto out = new_node(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out->values[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto an = a.node();
  attach(out, {a}, [an](TensorNode& self) {
    an->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i)
      if (an->values[i] > 0.0) an->grad[i] += self.grad[i];
  });
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  auto out = new_node({1});
  double acc = 0.0;
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) acc += a.data()[i];
  out->values[0] = acc;
  auto an = a.node();
  attach(out, {a}, [an](TensorNode& self) {
    an->ensure_grad();
    const double g = self.grad[0];
    for (auto& v : an->grad) v += g;
  });
  return Tensor(out);
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

// ---- shape ------------------------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_channels: no inputs");
  const auto& first = parts.front().shape();
  if (first.size() < 2) throw ValidationError("concat_channels: inputs need a channel dim");
  std::int64_t total_c = 0;
  std::int64_t rest = 1;
  for (std::size_t d = 2; d < first.size(); ++d) rest *= first[d];
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size() || s[0] != first[0])
      throw ValidationError("concat_channels: shape mismatch");
    for (std::size_t d = 2; d < s.size(); ++d)
      if (s[d] != first[d]) throw ValidationError("concat_channels: spatial dims differ");
    total_c += s[1];
  }
  std::vector<std::int64_t> out_shape = first;
  out_shape[1] = total_c;
  auto out = new_node(out_shape);

  const std::int64_t n_batch = first[0];
  std::int64_t c_off = 0;
  for (const auto& p : parts) {
    const std::int64_t c = p.shape()[1];
    for (std::int64_t n = 0; n < n_batch; ++n)
      std::copy(p.data() + n * c * rest, p.data() + (n + 1) * c * rest,
                out->values.data() + (n * total_c + c_off) * rest);
    c_off += c;
  }

  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::vector<std::int64_t> channels;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    channels.push_back(p.shape()[1]);
  }
  bool req = false;
  for (const auto& p : parts) req = req || p.requires_grad();
  if (grad_enabled() && req) {
    out->requires_grad = true;
    for (auto& np : nodes) out->parents.push_back(np);
    out->backward_fn = [nodes, channels, n_batch, total_c, rest](TensorNode& self) {
      std::int64_t c_off = 0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::int64_t c = channels[i];
        if (nodes[i]->requires_grad) {
          nodes[i]->ensure_grad();
          for (std::int64_t n = 0; n < n_batch; ++n) {
            const double* src = self.grad.data() + (n * total_c + c_off) * rest;
            double* dst = nodes[i]->grad.data() + n * c * rest;
            for (std::int64_t j = 0; j < c * rest; ++j) dst[j] += src[j];
          }
        }
        c_off += c;
      }
    };
  }
  return Tensor(out);
}

Tensor broadcast_volume(const Tensor& z, std::int64_t d0, std::int64_t d1, std::int64_t d2) {
  if (z.ndim() != 2) throw ValidationError("broadcast_volume expects [N,L]");
  const std::int64_t n_batch = z.dim(0), latent = z.dim(1);
  const std::int64_t spatial = d0 * d1 * d2;
  auto out = new_node({n_batch, latent, d0, d1, d2});
  for (std::int64_t n = 0; n < n_batch; ++n)
    for (std::int64_t l = 0; l < latent; ++l) {
      const double v = z.data()[n * latent + l];
      double* dst = out->values.data() + (n * latent + l) * spatial;
      std::fill(dst, dst + spatial, v);
    }
  auto zn = z.node();
  attach(out, {z}, [zn, n_batch, latent, spatial](TensorNode& self) {
    zn->ensure_grad();
    for (std::int64_t n = 0; n < n_batch; ++n)
      for (std::int64_t l = 0; l < latent; ++l) {
        const double* src = self.grad.data() + (n * latent + l) * spatial;
        double acc = 0.0;
        for (std::int64_t s = 0; s < spatial; ++s) acc += src[s];
        zn->grad[n * latent + l] += acc;
      }
  });
  return Tensor(out);
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() < 2) throw ValidationError("global_avg_pool expects [N,C,...]");
  const std::int64_t n_batch = x.dim(0), c = x.dim(1);
  std::int64_t spatial = 1;
  for (std::int64_t d = 2; d < x.ndim(); ++d) spatial *= x.dim(static_cast<std::size_t>(d));
  auto out = new_node({n_batch, c});
  const double inv = 1.0 / static_cast<double>(spatial);
  for (std::int64_t nc = 0; nc < n_batch * c; ++nc) {
    const double* src = x.data() + nc * spatial;
    double acc = 0.0;
    for (std::int64_t s = 0; s < spatial; ++s) acc += src[s];
    out->values[nc] = acc * inv;
  }
  auto xn = x.node();
  attach(out, {x}, [xn, spatial, inv](TensorNode& self) {
    xn->ensure_grad();
    const std::int64_t rows = self.numel();
    for (std::int64_t nc = 0; nc < rows; ++nc) {
      const double g = self.grad[nc] * inv;
      double* dst = xn->grad.data() + nc * spatial;
      for (std::int64_t s = 0; s < spatial; ++s) dst[s] += g;
    }
  });
  return Tensor(out);
}

// ---- dense ------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1))
    throw ValidationError("linear: expected x [N,F], w [O,F]");
  const std::int64_t n_batch = x.dim(0), in_f = x.dim(1), out_f = w.dim(0);
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != out_f))
    throw ValidationError("linear: bias shape mismatch");
  auto out = new_node({n_batch, out_f});
  for (std::int64_t n = 0; n < n_batch; ++n)
    for (std::int64_t o = 0; o < out_f; ++o) {
      double acc = b.defined() ? b.data()[o] : 0.0;
      const double* xr = x.data() + n * in_f;
      const double* wr = w.data() + o * in_f;
      for (std::int64_t f = 0; f < in_f; ++f) acc += xr[f] * wr[f];
      out->values[n * out_f + o] = acc;
    }
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  attach(out, {x, w, b}, [xn, wn, bn, n_batch, in_f, out_f](TensorNode& self) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::int64_t n = 0; n < n_batch; ++n)
        for (std::int64_t f = 0; f < in_f; ++f) {
          double acc = 0.0;
          for (std::int64_t o = 0; o < out_f; ++o)
            acc += self.grad[n * out_f + o] * wn->values[o * in_f + f];
          xn->grad[n * in_f + f] += acc;
        }
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      for (std::int64_t o = 0; o < out_f; ++o)
        for (std::int64_t f = 0; f < in_f; ++f) {
          double acc = 0.0;
          for (std::int64_t n = 0; n < n_batch; ++n)
            acc += self.grad[n * out_f + o] * xn->values[n * in_f + f];
          wn->grad[o * in_f + f] += acc;
        }
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t o = 0; o < out_f; ++o) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < n_batch; ++n) acc += self.grad[n * out_f + o];
        bn->grad[o] += acc;
      }
    }
  });
  return Tensor(out);
}

// ---- conv3d -----------------------------------------------------------------

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvOpts& opts) {
  if (x.ndim() != 5 || w.ndim() != 5) throw ValidationError("conv3d: expected 5-d x and w");
  if (x.dim(1) != w.dim(1)) throw ValidationError("conv3d: channel mismatch between x and w");
  const std::int64_t N = x.dim(0), Ci = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const std::int64_t Co = w.dim(0), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const auto& s = opts.stride;
  const auto& dl = opts.dilation;
  const auto& p = opts.padding;
  const std::int64_t Do = conv_out_dim(D, kd, s[0], p[0], dl[0]);
  const std::int64_t Ho = conv_out_dim(H, kh, s[1], p[1], dl[1]);
  const std::int64_t Wo = conv_out_dim(W, kw, s[2], p[2], dl[2]);
  if (Do < 1 || Ho < 1 || Wo < 1) throw ValidationError("conv3d: non-positive output dims");
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != Co))
    throw ValidationError("conv3d: bias shape mismatch");

  auto out = new_node({N, Co, Do, Ho, Wo});
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.defined() ? b.data() : nullptr;
  double* yd = out->values.data();

  parallel_for(N * Co * Do * Ho, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t row = begin; row < end; ++row) {
      const std::int64_t oh = row % Ho;
      const std::int64_t od = (row / Ho) % Do;
      const std::int64_t co = (row / (Ho * Do)) % Co;
      const std::int64_t n = row / (Ho * Do * Co);
      double* yrow = yd + row * Wo;
      const double init = bd ? bd[co] : 0.0;
      for (std::int64_t ow = 0; ow < Wo; ++ow) yrow[ow] = init;
      for (std::int64_t ci = 0; ci < Ci; ++ci)
        for (std::int64_t fd = 0; fd < kd; ++fd) {
          const std::int64_t id = od * s[0] - p[0] + fd * dl[0];
          if (id < 0 || id >= D) continue;
          for (std::int64_t fh = 0; fh < kh; ++fh) {
            const std::int64_t ih = oh * s[1] - p[1] + fh * dl[1];
            if (ih < 0 || ih >= H) continue;
            const double* xrow = xd + (((n * Ci + ci) * D + id) * H + ih) * W;
            const double* wrow = wd + (((co * Ci + ci) * kd + fd) * kh + fh) * kw;
            for (std::int64_t fw = 0; fw < kw; ++fw) {
              const double wv = wrow[fw];
              if (wv == 0.0) continue;
              const std::int64_t off = fw * dl[2] - p[2];
              std::int64_t lo, hi;
              valid_out_range(off, s[2], W, Wo, lo, hi);
              for (std::int64_t ow = lo; ow < hi; ++ow) yrow[ow] += wv * xrow[ow * s[2] + off];
            }
          }
        }
    }
  });

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  attach(out, {x, w, b}, [=](TensorNode& self) {
    const double* gy = self.grad.data();
    if (xn->requires_grad) {
      xn->ensure_grad();
      double* gx = xn->grad.data();
      parallel_for(N * Ci * D * H, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t row = begin; row < end; ++row) {
          const std::int64_t ih = row % H;
          const std::int64_t id = (row / H) % D;
          const std::int64_t ci = (row / (H * D)) % Ci;
          const std::int64_t n = row / (H * D * Ci);
          double* gxrow = gx + row * W;
          for (std::int64_t fd = 0; fd < kd; ++fd) {
            const std::int64_t t0 = id + p[0] - fd * dl[0];
            if (t0 < 0 || t0 % s[0]) continue;
            const std::int64_t od = t0 / s[0];
            if (od >= Do) continue;
            for (std::int64_t fh = 0; fh < kh; ++fh) {
              const std::int64_t t1 = ih + p[1] - fh * dl[1];
              if (t1 < 0 || t1 % s[1]) continue;
              const std::int64_t oh = t1 / s[1];
              if (oh >= Ho) continue;
              for (std::int64_t fw = 0; fw < kw; ++fw)
                for (std::int64_t co = 0; co < Co; ++co) {
                  const double wv = wn->values[(((co * Ci + ci) * kd + fd) * kh + fh) * kw + fw];
                  if (wv == 0.0) continue;
                  const double* gyrow = gy + (((n * Co + co) * Do + od) * Ho + oh) * Wo;
                  for (std::int64_t iw = 0; iw < W; ++iw) {
                    const std::int64_t t2 = iw + p[2] - fw * dl[2];
                    if (t2 < 0 || t2 % s[2]) continue;
                    const std::int64_t ow = t2 / s[2];
                    if (ow >= Wo) continue;
                    gxrow[iw] += wv * gyrow[ow];
                  }
                }
            }
          }
        }
      });
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      double* gw = wn->grad.data();
      parallel_for(Co * Ci * kd * kh * kw, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t widx = begin; widx < end; ++widx) {
          const std::int64_t fw = widx % kw;
          const std::int64_t fh = (widx / kw) % kh;
          const std::int64_t fd = (widx / (kw * kh)) % kd;
          const std::int64_t ci = (widx / (kw * kh * kd)) % Ci;
          const std::int64_t co = widx / (kw * kh * kd * Ci);
          double acc = 0.0;
          const std::int64_t off2 = fw * dl[2] - p[2];
          std::int64_t lo, hi;
          valid_out_range(off2, s[2], W, Wo, lo, hi);
          for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t od = 0; od < Do; ++od) {
              const std::int64_t id = od * s[0] - p[0] + fd * dl[0];
              if (id < 0 || id >= D) continue;
              for (std::int64_t oh = 0; oh < Ho; ++oh) {
                const std::int64_t ih = oh * s[1] - p[1] + fh * dl[1];
                if (ih < 0 || ih >= H) continue;
                const double* xrow = xn->values.data() + (((n * Ci + ci) * D + id) * H + ih) * W;
                const double* gyrow = gy + (((n * Co + co) * Do + od) * Ho + oh) * Wo;
                for (std::int64_t ow = lo; ow < hi; ++ow)
                  acc += gyrow[ow] * xrow[ow * s[2] + off2];
              }
            }
          gw[widx] += acc;
        }
      });
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t co = 0; co < Co; ++co) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < N; ++n) {
          const double* gyc = gy + (n * Co + co) * Do * Ho * Wo;
          for (std::int64_t i = 0; i < Do * Ho * Wo; ++i) acc += gyc[i];
        }
        bn->grad[co] += acc;
      }
    }
  });
  return Tensor(out);
}

// ---- deconv3d ---------------------------------------------------------------

Tensor deconv3d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvOpts& opts) {
  if (x.ndim() != 5 || w.ndim() != 5) throw ValidationError("deconv3d: expected 5-d x and w");
  if (x.dim(1) != w.dim(0)) throw ValidationError("deconv3d: channel mismatch between x and w");
  const std::int64_t N = x.dim(0), Ci = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const std::int64_t Co = w.dim(1), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const auto& s = opts.stride;
  const auto& dl = opts.dilation;
  const auto& p = opts.padding;
  const std::int64_t Do = deconv_out_dim(D, kd, s[0], p[0], dl[0]);
  const std::int64_t Ho = deconv_out_dim(H, kh, s[1], p[1], dl[1]);
  const std::int64_t Wo = deconv_out_dim(W, kw, s[2], p[2], dl[2]);
  if (Do < 1 || Ho < 1 || Wo < 1) throw ValidationError("deconv3d: non-positive output dims");
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != Co))
    throw ValidationError("deconv3d: bias shape mismatch");

  auto out = new_node({N, Co, Do, Ho, Wo});
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.defined() ? b.data() : nullptr;
  double* yd = out->values.data();

  parallel_for(N * Co * Do * Ho, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t row = begin; row < end; ++row) {
      const std::int64_t oh = row % Ho;
      const std::int64_t od = (row / Ho) % Do;
      const std::int64_t co = (row / (Ho * Do)) % Co;
      const std::int64_t n = row / (Ho * Do * Co);
      double* yrow = yd + row * Wo;
      const double init = bd ? bd[co] : 0.0;
      for (std::int64_t ow = 0; ow < Wo; ++ow) yrow[ow] = init;
      for (std::int64_t ci = 0; ci < Ci; ++ci)
        for (std::int64_t fd = 0; fd < kd; ++fd) {
          const std::int64_t t0 = od + p[0] - fd * dl[0];
          if (t0 < 0 || t0 % s[0]) continue;
          const std::int64_t id = t0 / s[0];
          if (id >= D) continue;
          for (std::int64_t fh = 0; fh < kh; ++fh) {
            const std::int64_t t1 = oh + p[1] - fh * dl[1];
            if (t1 < 0 || t1 % s[1]) continue;
            const std::int64_t ih = t1 / s[1];
            if (ih >= H) continue;
            const double* xrow = xd + (((n * Ci + ci) * D + id) * H + ih) * W;
            const double* wrow = wd + (((ci * Co + co) * kd + fd) * kh + fh) * kw;
            for (std::int64_t ow = 0; ow < Wo; ++ow) {
              double acc = 0.0;
              for (std::int64_t fw = 0; fw < kw; ++fw) {
                const std::int64_t t2 = ow + p[2] - fw * dl[2];
                if (t2 < 0 || t2 % s[2]) continue;
                const std::int64_t iw = t2 / s[2];
                if (iw >= W) continue;
                acc += wrow[fw] * xrow[iw];
              }
              yrow[ow] += acc;
            }
          }
        }
    }
  });

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  attach(out, {x, w, b}, [=](TensorNode& self) {
    const double* gy = self.grad.data();
    if (xn->requires_grad) {
      xn->ensure_grad();
      double* gx = xn->grad.data();
      parallel_for(N * Ci * D * H, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t row = begin; row < end; ++row) {
          const std::int64_t ih = row % H;
          const std::int64_t id = (row / H) % D;
          const std::int64_t ci = (row / (H * D)) % Ci;
          const std::int64_t n = row / (H * D * Ci);
          double* gxrow = gx + row * W;
          for (std::int64_t fd = 0; fd < kd; ++fd) {
            const std::int64_t od = id * s[0] - p[0] + fd * dl[0];
            if (od < 0 || od >= Do) continue;
            for (std::int64_t fh = 0; fh < kh; ++fh) {
              const std::int64_t oh = ih * s[1] - p[1] + fh * dl[1];
              if (oh < 0 || oh >= Ho) continue;
              for (std::int64_t co = 0; co < Co; ++co) {
                const double* gyrow = gy + (((n * Co + co) * Do + od) * Ho + oh) * Wo;
                const double* wrow = wn->values.data() + (((ci * Co + co) * kd + fd) * kh + fh) * kw;
                for (std::int64_t fw = 0; fw < kw; ++fw) {
                  const double wv = wrow[fw];
                  if (wv == 0.0) continue;
                  const std::int64_t off = fw * dl[2] - p[2];
                  std::int64_t lo, hi;
                  valid_out_range(off, s[2], Wo, W, lo, hi);
                  for (std::int64_t iw = lo; iw < hi; ++iw)
                    gxrow[iw] += wv * gyrow[iw * s[2] + off];
                }
              }
            }
          }
        }
      });
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      double* gw = wn->grad.data();
      parallel_for(Ci * Co * kd * kh * kw, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t widx = begin; widx < end; ++widx) {
          const std::int64_t fw = widx % kw;
          const std::int64_t fh = (widx / kw) % kh;
          const std::int64_t fd = (widx / (kw * kh)) % kd;
          const std::int64_t co = (widx / (kw * kh * kd)) % Co;
          const std::int64_t ci = widx / (kw * kh * kd * Co);
          double acc = 0.0;
          const std::int64_t off2 = fw * dl[2] - p[2];
          std::int64_t lo, hi;
          valid_out_range(off2, s[2], Wo, W, lo, hi);
          for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t id = 0; id < D; ++id) {
              const std::int64_t od = id * s[0] - p[0] + fd * dl[0];
              if (od < 0 || od >= Do) continue;
              for (std::int64_t ih = 0; ih < H; ++ih) {
                const std::int64_t oh = ih * s[1] - p[1] + fh * dl[1];
                if (oh < 0 || oh >= Ho) continue;
                const double* xrow = xn->values.data() + (((n * Ci + ci) * D + id) * H + ih) * W;
                const double* gyrow = gy + (((n * Co + co) * Do + od) * Ho + oh) * Wo;
                for (std::int64_t iw = lo; iw < hi; ++iw)
                  acc += xrow[iw] * gyrow[iw * s[2] + off2];
              }
            }
          gw[widx] += acc;
        }
      });
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t co = 0; co < Co; ++co) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < N; ++n) {
          const double* gyc = gy + (n * Co + co) * Do * Ho * Wo;
          for (std::int64_t i = 0; i < Do * Ho * Wo; ++i) acc += gyc[i];
        }
        bn->grad[co] += acc;
      }
    }
  });
  return Tensor(out);
}

// ---- conv2d -----------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOpts& opts) {
  if (x.ndim() != 4 || w.ndim() != 4) throw ValidationError("conv2d: expected 4-d x and w");
  if (x.dim(1) != w.dim(1)) throw ValidationError("conv2d: channel mismatch between x and w");
  const std::int64_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto& s = opts.stride;
  const auto& dl = opts.dilation;
  const auto& p = opts.padding;
  const std::int64_t Ho = conv_out_dim(H, kh, s[0], p[0], dl[0]);
  const std::int64_t Wo = conv_out_dim(W, kw, s[1], p[1], dl[1]);
  if (Ho < 1 || Wo < 1) throw ValidationError("conv2d: non-positive output dims");
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != Co))
    throw ValidationError("conv2d: bias shape mismatch");

  auto out = new_node({N, Co, Ho, Wo});
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.defined() ? b.data() : nullptr;
  double* yd = out->values.data();

  parallel_for(N * Co * Ho, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t row = begin; row < end; ++row) {
      const std::int64_t oh = row % Ho;
      const std::int64_t co = (row / Ho) % Co;
      const std::int64_t n = row / (Ho * Co);
      double* yrow = yd + row * Wo;
      const double init = bd ? bd[co] : 0.0;
      for (std::int64_t ow = 0; ow < Wo; ++ow) yrow[ow] = init;
      for (std::int64_t ci = 0; ci < Ci; ++ci)
        for (std::int64_t fh = 0; fh < kh; ++fh) {
          const std::int64_t ih = oh * s[0] - p[0] + fh * dl[0];
          if (ih < 0 || ih >= H) continue;
          const double* xrow = xd + ((n * Ci + ci) * H + ih) * W;
          const double* wrow = wd + ((co * Ci + ci) * kh + fh) * kw;
          for (std::int64_t fw = 0; fw < kw; ++fw) {
            const double wv = wrow[fw];
            if (wv == 0.0) continue;
            const std::int64_t off = fw * dl[1] - p[1];
            std::int64_t lo, hi;
            valid_out_range(off, s[1], W, Wo, lo, hi);
            for (std::int64_t ow = lo; ow < hi; ++ow) yrow[ow] += wv * xrow[ow * s[1] + off];
          }
        }
    }
  });

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  attach(out, {x, w, b}, [=](TensorNode& self) {
    const double* gy = self.grad.data();
    if (xn->requires_grad) {
      xn->ensure_grad();
      double* gx = xn->grad.data();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t ci = 0; ci < Ci; ++ci)
          for (std::int64_t ih = 0; ih < H; ++ih) {
            double* gxrow = gx + ((n * Ci + ci) * H + ih) * W;
            for (std::int64_t fh = 0; fh < kh; ++fh) {
              const std::int64_t t1 = ih + p[0] - fh * dl[0];
              if (t1 < 0 || t1 % s[0]) continue;
              const std::int64_t oh = t1 / s[0];
              if (oh >= Ho) continue;
              for (std::int64_t co = 0; co < Co; ++co) {
                const double* gyrow = gy + ((n * Co + co) * Ho + oh) * Wo;
                const double* wrow = wn->values.data() + ((co * Ci + ci) * kh + fh) * kw;
                for (std::int64_t fw = 0; fw < kw; ++fw) {
                  const double wv = wrow[fw];
                  if (wv == 0.0) continue;
                  for (std::int64_t iw = 0; iw < W; ++iw) {
                    const std::int64_t t2 = iw + p[1] - fw * dl[1];
                    if (t2 < 0 || t2 % s[1]) continue;
                    const std::int64_t ow = t2 / s[1];
                    if (ow >= Wo) continue;
                    gxrow[iw] += wv * gyrow[ow];
                  }
                }
              }
            }
          }
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      double* gw = wn->grad.data();
      for (std::int64_t widx = 0; widx < Co * Ci * kh * kw; ++widx) {
        const std::int64_t fw = widx % kw;
        const std::int64_t fh = (widx / kw) % kh;
        const std::int64_t ci = (widx / (kw * kh)) % Ci;
        const std::int64_t co = widx / (kw * kh * Ci);
        double acc = 0.0;
        const std::int64_t off = fw * dl[1] - p[1];
        std::int64_t lo, hi;
        valid_out_range(off, s[1], W, Wo, lo, hi);
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t oh = 0; oh < Ho; ++oh) {
            const std::int64_t ih = oh * s[0] - p[0] + fh * dl[0];
            if (ih < 0 || ih >= H) continue;
            const double* xrow = xn->values.data() + ((n * Ci + ci) * H + ih) * W;
            const double* gyrow = gy + ((n * Co + co) * Ho + oh) * Wo;
            for (std::int64_t ow = lo; ow < hi; ++ow) acc += gyrow[ow] * xrow[ow * s[1] + off];
          }
        gw[widx] += acc;
      }
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t co = 0; co < Co; ++co) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < N; ++n) {
          const double* gyc = gy + (n * Co + co) * Ho * Wo;
          for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += gyc[i];
        }
        bn->grad[co] += acc;
      }
    }
  });
  return Tensor(out);
}

// ---- batch norm -------------------------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum, double eps) {
  if (x.ndim() < 2) throw ValidationError("batch_norm expects [N,C,...]");
  const std::int64_t N = x.dim(0), C = x.dim(1);
  std::int64_t spatial = 1;
  for (std::int64_t d = 2; d < x.ndim(); ++d) spatial *= x.dim(static_cast<std::size_t>(d));
  if (gamma.numel() != C || beta.numel() != C)
    throw ValidationError("batch_norm: gamma/beta must have C entries");
  if (static_cast<std::int64_t>(running_mean.size()) != C ||
      static_cast<std::int64_t>(running_var.size()) != C)
    throw ValidationError("batch_norm: running buffers must have C entries");

  const std::int64_t m = N * spatial;
  std::vector<double> mu(static_cast<std::size_t>(C), 0.0);
  std::vector<double> inv_std(static_cast<std::size_t>(C), 0.0);

  if (training) {
    for (std::int64_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const double* src = x.data() + (n * C + c) * spatial;
        for (std::int64_t s2 = 0; s2 < spatial; ++s2) acc += src[s2];
      }
      mu[c] = acc / static_cast<double>(m);
      double var = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const double* src = x.data() + (n * C + c) * spatial;
        for (std::int64_t s2 = 0; s2 < spatial; ++s2) {
          const double d = src[s2] - mu[c];
          var += d * d;
        }
      }
      var /= static_cast<double>(m);
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      const double var_unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu[c];
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var_unbiased;
    }
  } else {
    for (std::int64_t c = 0; c < C; ++c) {
      mu[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  auto out = new_node(x.shape());
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c) {
      const double* src = x.data() + (n * C + c) * spatial;
      double* dst = out->values.data() + (n * C + c) * spatial;
      const double g = gamma.data()[c], bta = beta.data()[c];
      for (std::int64_t s2 = 0; s2 < spatial; ++s2)
        dst[s2] = g * (src[s2] - mu[c]) * inv_std[c] + bta;
    }

  auto xn = x.node();
  auto gn = gamma.node();
  auto btn = beta.node();
  attach(out, {x, gamma, beta}, [xn, gn, btn, mu, inv_std, training, N, C, spatial,
                                 m](TensorNode& self) {
    const double* gy = self.grad.data();
    // Per-channel reductions shared by all three grads.
    std::vector<double> sum_gy(static_cast<std::size_t>(C), 0.0);
    std::vector<double> sum_gy_xhat(static_cast<std::size_t>(C), 0.0);
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const double* gr = gy + (n * C + c) * spatial;
        const double* xr = xn->values.data() + (n * C + c) * spatial;
        double a = 0.0, b2 = 0.0;
        for (std::int64_t s2 = 0; s2 < spatial; ++s2) {
          a += gr[s2];
          b2 += gr[s2] * (xr[s2] - mu[c]) * inv_std[c];
        }
        sum_gy[c] += a;
        sum_gy_xhat[c] += b2;
      }
    if (gn->requires_grad) {
      gn->ensure_grad();
      for (std::int64_t c = 0; c < C; ++c) gn->grad[c] += sum_gy_xhat[c];
    }
    if (btn->requires_grad) {
      btn->ensure_grad();
      for (std::int64_t c = 0; c < C; ++c) btn->grad[c] += sum_gy[c];
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
          const double* gr = gy + (n * C + c) * spatial;
          const double* xr = xn->values.data() + (n * C + c) * spatial;
          double* dst = xn->grad.data() + (n * C + c) * spatial;
          const double g = gn->values[c] * inv_std[c];
          if (training) {
            for (std::int64_t s2 = 0; s2 < spatial; ++s2) {
              const double xhat = (xr[s2] - mu[c]) * inv_std[c];
              dst[s2] += g * (gr[s2] - inv_m * sum_gy[c] - xhat * inv_m * sum_gy_xhat[c]);
            }
          } else {
            for (std::int64_t s2 = 0; s2 < spatial; ++s2) dst[s2] += g * gr[s2];
          }
        }
    }
  });
  return Tensor(out);
}

// ---- softmax ----------------------------------------------------------------

Tensor softmax_channel(const Tensor& x) {
  if (x.ndim() < 2) throw ValidationError("softmax_channel expects [N,C,...]");
  const std::int64_t N = x.dim(0), C = x.dim(1);
  std::int64_t spatial = 1;
  for (std::int64_t d = 2; d < x.ndim(); ++d) spatial *= x.dim(static_cast<std::size_t>(d));

  auto out = new_node(x.shape());
  parallel_for(N * spatial, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t pos = begin; pos < end; ++pos) {
      const std::int64_t n = pos / spatial;
      const std::int64_t sp = pos % spatial;
      const double* base = x.data() + n * C * spatial + sp;
      double* obase = out->values.data() + n * C * spatial + sp;
      double mx = base[0];
      for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, base[c * spatial]);
      double z = 0.0;
      for (std::int64_t c = 0; c < C; ++c) z += std::exp(base[c * spatial] - mx);
      for (std::int64_t c = 0; c < C; ++c) obase[c * spatial] = std::exp(base[c * spatial] - mx) / z;
    }
  });

  auto xn = x.node();
  attach(out, {x}, [xn, N, C, spatial](TensorNode& self) {
    xn->ensure_grad();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t sp = 0; sp < spatial; ++sp) {
        const double* pr = self.values.data() + n * C * spatial + sp;
        const double* gr = self.grad.data() + n * C * spatial + sp;
        double dot = 0.0;
        for (std::int64_t c = 0; c < C; ++c) dot += gr[c * spatial] * pr[c * spatial];
        double* dst = xn->grad.data() + n * C * spatial + sp;
        for (std::int64_t c = 0; c < C; ++c)
          dst[c * spatial] += pr[c * spatial] * (gr[c * spatial] - dot);
      }
  });
  return Tensor(out);
}

// ---- losses -----------------------------------------------------------------

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::int32_t>& targets,
                             std::int32_t ignore_label) {
  if (logits.ndim() < 2) throw ValidationError("softmax_cross_entropy expects [N,C,...]");
  const std::int64_t N = logits.dim(0), C = logits.dim(1);
  std::int64_t spatial = 1;
  for (std::int64_t d = 2; d < logits.ndim(); ++d) spatial *= logits.dim(static_cast<std::size_t>(d));
  if (static_cast<std::int64_t>(targets.size()) != N * spatial)
    throw ValidationError("softmax_cross_entropy: target count does not match positions");
  std::int64_t count = 0;
  for (std::int32_t t : targets) {
    if (t == ignore_label) continue;
    if (t < 0 || t >= C)
      throw ValidationError("softmax_cross_entropy: target " + std::to_string(t) +
                            " out of range for " + std::to_string(C) + " classes");
    ++count;
  }

  auto out = new_node({1});
  double total = 0.0;
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t sp = 0; sp < spatial; ++sp) {
      const std::int32_t t = targets[static_cast<std::size_t>(n * spatial + sp)];
      if (t == ignore_label) continue;
      const double* base = logits.data() + n * C * spatial + sp;
      double mx = base[0];
      for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, base[c * spatial]);
      double z = 0.0;
      for (std::int64_t c = 0; c < C; ++c) z += std::exp(base[c * spatial] - mx);
      total += mx + std::log(z) - base[static_cast<std::int64_t>(t) * spatial];
    }
  out->values[0] = count > 0 ? total / static_cast<double>(count) : 0.0;

  auto ln = logits.node();
  attach(out, {logits}, [ln, targets, ignore_label, N, C, spatial, count](TensorNode& self) {
    if (count == 0) return;
    ln->ensure_grad();
    const double g = self.grad[0] / static_cast<double>(count);
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t sp = 0; sp < spatial; ++sp) {
        const std::int32_t t = targets[static_cast<std::size_t>(n * spatial + sp)];
        if (t == ignore_label) continue;
        const double* base = ln->values.data() + n * C * spatial + sp;
        double* dst = ln->grad.data() + n * C * spatial + sp;
        double mx = base[0];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, base[c * spatial]);
        double z = 0.0;
        for (std::int64_t c = 0; c < C; ++c) z += std::exp(base[c * spatial] - mx);
        for (std::int64_t c = 0; c < C; ++c) {
          const double p = std::exp(base[c * spatial] - mx) / z;
          dst[c * spatial] += g * (p - (c == static_cast<std::int64_t>(t) ? 1.0 : 0.0));
        }
      }
  });
  return Tensor(out);
}

Tensor kl_standard_normal(const Tensor& mean, const Tensor& logvar) {
  check_same_shape(mean, logvar, "kl_standard_normal");
  if (mean.ndim() != 2) throw ValidationError("kl_standard_normal expects [N,L]");
  const std::int64_t N = mean.dim(0);
  const std::int64_t total = mean.numel();
  auto out = new_node({1});
  double acc = 0.0;
  for (std::int64_t i = 0; i < total; ++i) {
    const double m = mean.data()[i];
    const double lv = logvar.data()[i];
    acc += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
  }
  out->values[0] = acc / static_cast<double>(N);

  auto mn = mean.node();
  auto ln = logvar.node();
  attach(out, {mean, logvar}, [mn, ln, N, total](TensorNode& self) {
    const double g = self.grad[0] / static_cast<double>(N);
    if (mn->requires_grad) {
      mn->ensure_grad();
      for (std::int64_t i = 0; i < total; ++i) mn->grad[i] += g * mn->values[i];
    }
    if (ln->requires_grad) {
      ln->ensure_grad();
      for (std::int64_t i = 0; i < total; ++i)
        ln->grad[i] += g * 0.5 * (std::exp(ln->values[i]) - 1.0);
    }
  });
  return Tensor(out);
}

// ---- init -------------------------------------------------------------------

Tensor kaiming_uniform(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng,
                       bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor randn(std::vector<std::int64_t> shape, Rng& rng, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace ssc::nn
