#include <cmath>
#include <stdexcept>

#include "avtenet/kernels.hpp"
#include "avtenet/tensor.hpp"

namespace avtenet {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

inline std::vector<double>* grad_of(const NodePtr& p) {
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

void check_rank(const Tensor& t, std::size_t r, const char* op) {
  if (t.rank() != r)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(r) +
                                ", got " + shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  NodePtr pa = a.node(), pb = b.node();
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [pa, pb](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  NodePtr pa = a.node(), pb = b.node();
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [pa, pb](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  NodePtr pa = a.node(), pb = b.node();
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [pa, pb](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * pb->data[i];
    if (auto* g = grad_of(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * pa->data[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  NodePtr pa = a.node();
  return Tensor::make_op(a.shape(), std::move(out), {a}, [pa, c](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  NodePtr pa = a.node();
  return Tensor::make_op(a.shape(), std::move(out), {a}, [pa](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank(a, 2, "matmul");
  check_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw std::invalid_argument("matmul: inner dims " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  std::vector<double> out(m * n);
  kernels::matmul(a.values().data(), b.values().data(), out.data(), m, k, n, false, false, false);
  NodePtr pa = a.node(), pb = b.node();
  return Tensor::make_op({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      kernels::matmul(self.grad.data(), pb->data.data(), g->data(), m, n, k, false, true, true);
    if (auto* g = grad_of(pb))
      kernels::matmul(pa->data.data(), self.grad.data(), g->data(), k, m, n, true, false, true);
  });
}

Tensor transpose(const Tensor& a) {
  check_rank(a, 2, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  NodePtr pa = a.node();
  return Tensor::make_op({c, r}, std::move(out), {a}, [pa, r, c](const TensorNode& self) {
    if (auto* g = grad_of(pa))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add_row(const Tensor& m, const Tensor& v) {
  check_rank(m, 2, "add_row");
  check_rank(v, 1, "add_row");
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  if (v.shape()[0] != c)
    throw std::invalid_argument("add_row: row length " + std::to_string(v.shape()[0]) +
                                " vs " + std::to_string(c) + " columns");
  std::vector<double> out(r * c);
  const auto& mv = m.values();
  const auto& vv = v.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] + vv[j];
  NodePtr pm = m.node(), pv = v.node();
  return Tensor::make_op({r, c}, std::move(out), {m, v}, [pm, pv, r, c](const TensorNode& self) {
    if (auto* g = grad_of(pm))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(pv))
      for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i) s += self.grad[i * c + j];
        (*g)[j] += s;
      }
  });
}

Tensor add_channel_bias(const Tensor& t, const Tensor& b) {
  check_rank(b, 1, "add_channel_bias");
  if (t.rank() < 1 || t.shape()[0] != b.shape()[0])
    throw std::invalid_argument("add_channel_bias: leading dim of " + shape_str(t.shape()) +
                                " must match bias " + shape_str(b.shape()));
  const std::size_t ch = t.shape()[0];
  const std::size_t rest = t.numel() / ch;
  std::vector<double> out(t.numel());
  const auto& tv = t.values();
  const auto& bv = b.values();
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t s = 0; s < rest; ++s) out[c * rest + s] = tv[c * rest + s] + bv[c];
  NodePtr pt = t.node(), pb = b.node();
  return Tensor::make_op(t.shape(), std::move(out), {t, b}, [pt, pb, ch, rest](const TensorNode& self) {
    if (auto* g = grad_of(pt))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(pb))
      for (std::size_t c = 0; c < ch; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < rest; ++k) s += self.grad[c * rest + k];
        (*g)[c] += s;
      }
  });
}

namespace {

// Lane decomposition for softmax: count lanes, lane length, strides.
struct Lanes {
  std::size_t count, len, lane_stride, elem_stride;
};

Lanes lanes_for(const Tensor& t, std::size_t axis, const char* op) {
  if (t.rank() == 1) {
    if (axis != 0) throw std::invalid_argument(std::string(op) + ": axis out of range");
    return {1, t.shape()[0], 0, 1};
  }
  if (t.rank() == 2) {
    const std::size_t r = t.shape()[0], c = t.shape()[1];
    if (axis == 1) return {r, c, c, 1};
    if (axis == 0) return {c, r, 1, c};
    throw std::invalid_argument(std::string(op) + ": axis out of range");
  }
  throw std::invalid_argument(std::string(op) + ": rank must be 1 or 2");
}

}  // namespace

Tensor softmax(const Tensor& t, std::size_t axis) {
  const Lanes ln = lanes_for(t, axis, "softmax");
  std::vector<double> out(t.numel());
  const auto& tv = t.values();
  for (std::size_t l = 0; l < ln.count; ++l) {
    const std::size_t base = l * ln.lane_stride;
    double mx = tv[base];
    for (std::size_t i = 1; i < ln.len; ++i) mx = std::max(mx, tv[base + i * ln.elem_stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < ln.len; ++i) {
      const double e = std::exp(tv[base + i * ln.elem_stride] - mx);
      out[base + i * ln.elem_stride] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < ln.len; ++i) out[base + i * ln.elem_stride] /= sum;
  }
  NodePtr pt = t.node();
  return Tensor::make_op(t.shape(), std::move(out), {t}, [pt, ln](const TensorNode& self) {
    auto* g = grad_of(pt);
    if (!g) return;
    for (std::size_t l = 0; l < ln.count; ++l) {
      const std::size_t base = l * ln.lane_stride;
      double dot = 0.0;
      for (std::size_t i = 0; i < ln.len; ++i) {
        const std::size_t ix = base + i * ln.elem_stride;
        dot += self.grad[ix] * self.data[ix];
      }
      for (std::size_t i = 0; i < ln.len; ++i) {
        const std::size_t ix = base + i * ln.elem_stride;
        (*g)[ix] += self.data[ix] * (self.grad[ix] - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps) {
  check_rank(gain, 1, "layer_norm");
  check_rank(bias, 1, "layer_norm");
  if (t.rank() < 1 || t.rank() > 2)
    throw std::invalid_argument("layer_norm: rank must be 1 or 2");
  const std::size_t d = t.shape()[t.rank() - 1];
  const std::size_t rows = t.numel() / d;
  if (gain.shape()[0] != d || bias.shape()[0] != d)
    throw std::invalid_argument("layer_norm: gain/bias must have length " + std::to_string(d));

  std::vector<double> out(t.numel());
  std::vector<double> inv_s(rows);
  const auto& tv = t.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = tv.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += x[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (x[i] - mu) * (x[i] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_s[r] = is;
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = ((x[i] - mu) * is) * gv[i] + bv[i];
  }
  NodePtr pt = t.node(), pg = gain.node(), pb = bias.node();
  return Tensor::make_op(
      t.shape(), std::move(out), {t, gain, bias},
      [pt, pg, pb, d, rows, inv_s](const TensorNode& self) {
        auto* gt = grad_of(pt);
        auto* gg = grad_of(pg);
        auto* gb = grad_of(pb);
        std::vector<double> n(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double is = inv_s[r];
          const double* x = pt->data.data() + r * d;
          double mu = 0.0;
          for (std::size_t i = 0; i < d; ++i) mu += x[i];
          mu /= static_cast<double>(d);
          for (std::size_t i = 0; i < d; ++i) n[i] = (x[i] - mu) * is;
          const double* gy = self.grad.data() + r * d;
          if (gg)
            for (std::size_t i = 0; i < d; ++i) (*gg)[i] += gy[i] * n[i];
          if (gb)
            for (std::size_t i = 0; i < d; ++i) (*gb)[i] += gy[i];
          if (gt) {
            double mean_h = 0.0, mean_hn = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              const double h = gy[i] * pg->data[i];
              mean_h += h;
              mean_hn += h * n[i];
            }
            mean_h /= static_cast<double>(d);
            mean_hn /= static_cast<double>(d);
            for (std::size_t i = 0; i < d; ++i) {
              const double h = gy[i] * pg->data[i];
              (*gt)[r * d + i] += (h - mean_h - n[i] * mean_hn) * is;
            }
          }
        }
      });
}

Tensor gelu(const Tensor& t) {
  std::vector<double> out(t.numel());
  const auto& tv = t.values();
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * tv[i] * (1.0 + std::erf(tv[i] * inv_sqrt2));
  NodePtr pt = t.node();
  return Tensor::make_op(t.shape(), std::move(out), {t}, [pt](const TensorNode& self) {
    auto* g = grad_of(pt);
    if (!g) return;
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = pt->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      (*g)[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor relu(const Tensor& t) {
  std::vector<double> out(t.numel());
  const auto& tv = t.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tv[i] > 0.0 ? tv[i] : 0.0;
  NodePtr pt = t.node();
  return Tensor::make_op(t.shape(), std::move(out), {t}, [pt](const TensorNode& self) {
    auto* g = grad_of(pt);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pt->data[i] > 0.0) (*g)[i] += self.grad[i];
  });
}

Tensor log_e(const Tensor& t) {
  std::vector<double> out(t.numel());
  const auto& tv = t.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(tv[i]);
  NodePtr pt = t.node();
  return Tensor::make_op(t.shape(), std::move(out), {t}, [pt](const TensorNode& self) {
    auto* g = grad_of(pt);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] / pt->data[i];
  });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  std::vector<double> out(t.numel());
  const auto& tv = t.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(tv[i], lo), hi);
  NodePtr pt = t.node();
  return Tensor::make_op(t.shape(), std::move(out), {t}, [pt, lo, hi](const TensorNode& self) {
    auto* g = grad_of(pt);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pt->data[i] > lo && pt->data[i] < hi) (*g)[i] += self.grad[i];
  });
}

Tensor conv1d(const Tensor& x, const Tensor& ker, std::size_t stride, std::size_t pad) {
  check_rank(x, 2, "conv1d");
  check_rank(ker, 3, "conv1d");
  const std::size_t c_in = x.shape()[0], t_in = x.shape()[1];
  const std::size_t c_out = ker.shape()[0], k = ker.shape()[2];
  if (ker.shape()[1] != c_in)
    throw std::invalid_argument("conv1d: kernel expects " + std::to_string(ker.shape()[1]) +
                                " input channels, got " + std::to_string(c_in));
  if (stride == 0) throw std::invalid_argument("conv1d: stride must be positive");
  if (t_in + 2 * pad < k) throw std::invalid_argument("conv1d: kernel wider than padded input");
  const std::size_t t_out = (t_in + 2 * pad - k) / stride + 1;
  std::vector<double> out(c_out * t_out);
  kernels::conv1d_forward(x.values().data(), ker.values().data(), out.data(), c_in, t_in, c_out,
                          k, stride, pad);
  NodePtr px = x.node(), pk = ker.node();
  return Tensor::make_op(
      {c_out, t_out}, std::move(out), {x, ker},
      [px, pk, c_in, t_in, c_out, k, stride, pad](const TensorNode& self) {
        if (auto* g = grad_of(px))
          kernels::conv1d_grad_input(self.grad.data(), pk->data.data(), g->data(), c_in, t_in,
                                     c_out, k, stride, pad);
        if (auto* g = grad_of(pk))
          kernels::conv1d_grad_kernel(self.grad.data(), px->data.data(), g->data(), c_in, t_in,
                                      c_out, k, stride, pad);
      });
}

Tensor conv2d(const Tensor& x, const Tensor& ker, std::size_t stride, std::size_t pad) {
  check_rank(x, 3, "conv2d");
  check_rank(ker, 4, "conv2d");
  const std::size_t c_in = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t c_out = ker.shape()[0], kh = ker.shape()[2], kw = ker.shape()[3];
  if (ker.shape()[1] != c_in)
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(ker.shape()[1]) +
                                " input channels, got " + std::to_string(c_in));
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (h + 2 * pad < kh || w + 2 * pad < kw)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(c_out * ho * wo);
  kernels::conv2d_forward(x.values().data(), ker.values().data(), out.data(), c_in, h, w, c_out,
                          kh, kw, stride, pad);
  NodePtr px = x.node(), pk = ker.node();
  return Tensor::make_op(
      {c_out, ho, wo}, std::move(out), {x, ker},
      [px, pk, c_in, h, w, c_out, kh, kw, stride, pad](const TensorNode& self) {
        if (auto* g = grad_of(px))
          kernels::conv2d_grad_input(self.grad.data(), pk->data.data(), g->data(), c_in, h, w,
                                     c_out, kh, kw, stride, pad);
        if (auto* g = grad_of(pk))
          kernels::conv2d_grad_kernel(self.grad.data(), px->data.data(), g->data(), c_in, h, w,
                                      c_out, kh, kw, stride, pad);
      });
}

Tensor concat(std::size_t axis, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rank = parts[0].rank();
  if (rank == 0 || rank > 2) throw std::invalid_argument("concat: rank must be 1 or 2");
  if (axis >= rank) throw std::invalid_argument("concat: axis out of range");
  for (const Tensor& p : parts) {
    if (p.rank() != rank) throw std::invalid_argument("concat: mixed ranks");
    for (std::size_t d = 0; d < rank; ++d)
      if (d != axis && p.shape()[d] != parts[0].shape()[d])
        throw std::invalid_argument("concat: off-axis dim mismatch " + shape_str(p.shape()) +
                                    " vs " + shape_str(parts[0].shape()));
  }

  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  for (const Tensor& p : parts) out_shape[axis] += p.shape()[axis];
  std::vector<double> out(shape_numel(out_shape));

  if (rank == 1 || axis == 0) {
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      const auto& pv = p.values();
      std::copy(pv.begin(), pv.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
      off += pv.size();
    }
  } else {
    const std::size_t rows = out_shape[0], cols = out_shape[1];
    std::size_t col_off = 0;
    for (const Tensor& p : parts) {
      const std::size_t pc = p.shape()[1];
      const auto& pv = p.values();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < pc; ++c) out[r * cols + col_off + c] = pv[r * pc + c];
      col_off += pc;
    }
  }

  std::vector<NodePtr> nodes;
  std::vector<std::size_t> sizes;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    sizes.push_back(p.shape()[axis]);
  }
  const bool row_mode = (rank == 1 || axis == 0);
  const std::size_t rows = rank == 2 ? out_shape[0] : 1;
  const std::size_t cols = rank == 2 ? out_shape[1] : out_shape[0];
  return Tensor::make_op(
      out_shape, std::move(out), parts,
      [nodes, sizes, row_mode, rows, cols](const TensorNode& self) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
          auto* g = grad_of(nodes[p]);
          if (row_mode) {
            const std::size_t count = nodes[p]->data.size();
            if (g)
              for (std::size_t i = 0; i < count; ++i) (*g)[i] += self.grad[off + i];
            off += count;
          } else {
            const std::size_t pc = sizes[p];
            if (g)
              for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < pc; ++c)
                  (*g)[r * pc + c] += self.grad[r * cols + off + c];
            off += pc;
          }
        }
      });
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t len) {
  const std::size_t rank = t.rank();
  if (rank == 0 || rank > 2) throw std::invalid_argument("slice: rank must be 1 or 2");
  if (axis >= rank) throw std::invalid_argument("slice: axis out of range");
  if (start + len > t.shape()[axis] || len == 0)
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of " +
                                std::to_string(t.shape()[axis]));

  Shape out_shape = t.shape();
  out_shape[axis] = len;
  std::vector<double> out(shape_numel(out_shape));
  const auto& tv = t.values();
  const std::size_t cols = rank == 2 ? t.shape()[1] : 1;

  if (rank == 1) {
    for (std::size_t i = 0; i < len; ++i) out[i] = tv[start + i];
  } else if (axis == 0) {
    std::copy(tv.begin() + static_cast<std::ptrdiff_t>(start * cols),
              tv.begin() + static_cast<std::ptrdiff_t>((start + len) * cols), out.begin());
  } else {
    const std::size_t rows = t.shape()[0];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < len; ++c) out[r * len + c] = tv[r * cols + start + c];
  }

  NodePtr pt = t.node();
  return Tensor::make_op(
      out_shape, std::move(out), {t},
      [pt, rank, axis, start, len, cols](const TensorNode& self) {
        auto* g = grad_of(pt);
        if (!g) return;
        if (rank == 1) {
          for (std::size_t i = 0; i < len; ++i) (*g)[start + i] += self.grad[i];
        } else if (axis == 0) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[start * cols + i] += self.grad[i];
        } else {
          const std::size_t rows = pt->shape[0];
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < len; ++c)
              (*g)[r * cols + start + c] += self.grad[r * len + c];
        }
      });
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_numel(shape) != t.numel())
    throw std::invalid_argument("reshape: " + shape_str(t.shape()) + " to " + shape_str(shape) +
                                " changes element count");
  NodePtr pt = t.node();
  return Tensor::make_op(std::move(shape), t.values(), {t}, [pt](const TensorNode& self) {
    if (auto* g = grad_of(pt))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor mean_all(const Tensor& t) {
  if (t.numel() == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (double v : t.values()) s += v;
  const double inv = 1.0 / static_cast<double>(t.numel());
  NodePtr pt = t.node();
  return Tensor::make_op(Shape{}, {s * inv}, {t}, [pt, inv](const TensorNode& self) {
    if (auto* g = grad_of(pt))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0] * inv;
  });
}

Tensor sum_all(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  NodePtr pt = t.node();
  return Tensor::make_op(Shape{}, {s}, {t}, [pt](const TensorNode& self) {
    if (auto* g = grad_of(pt))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0];
  });
}

Tensor mean_rows(const Tensor& t) {
  check_rank(t, 2, "mean_rows");
  const std::size_t r = t.shape()[0], c = t.shape()[1];
  std::vector<double> out(c, 0.0);
  const auto& tv = t.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += tv[i * c + j];
  const double inv = 1.0 / static_cast<double>(r);
  for (std::size_t j = 0; j < c; ++j) out[j] *= inv;
  NodePtr pt = t.node();
  return Tensor::make_op({c}, std::move(out), {t}, [pt, r, c, inv](const TensorNode& self) {
    if (auto* g = grad_of(pt))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += self.grad[j] * inv;
  });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads, const AttentionWeights& w) {
  check_rank(q, 2, "attention");
  check_rank(k, 2, "attention");
  check_rank(v, 2, "attention");
  const std::size_t d = q.shape()[1];
  if (k.shape()[1] != d || v.shape()[1] != d)
    throw std::invalid_argument("attention: q/k/v model dims differ");
  if (k.shape()[0] != v.shape()[0])
    throw std::invalid_argument("attention: k and v token counts differ");
  if (heads == 0 || d % heads != 0)
    throw std::invalid_argument("attention: model dim " + std::to_string(d) +
                                " not divisible by " + std::to_string(heads) + " heads");
  const std::size_t dh = d / heads;

  Tensor qp = add_row(matmul(q, w.wq), w.bq);
  Tensor kp = add_row(matmul(k, w.wk), w.bk);
  Tensor vp = add_row(matmul(v, w.wv), w.bv);

  std::vector<Tensor> ctx;
  ctx.reserve(heads);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(qp, 1, h * dh, dh);
    Tensor kh = slice(kp, 1, h * dh, dh);
    Tensor vh = slice(vp, 1, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
    Tensor attn = softmax(scores, 1);
    ctx.push_back(matmul(attn, vh));
  }
  return add_row(matmul(concat(1, ctx), w.wo), w.bo);
}

}  // namespace avtenet
