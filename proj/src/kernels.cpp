#include "avtenet/kernels.hpp"

#include <cstddef>
#include <vector>

// Contract shared by both namespaces: every output element is produced as a
// local sum taken in a fixed order (ascending reduction index), then written
// or added to the destination in one step. Parallelism is only ever across
// output elements, never across a single reduction, which is what makes the
// OpenMP kernels bit-identical to the serial reference.

namespace {

inline std::size_t conv_out_len(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

namespace avtenet::kernels {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate) {
  const std::ptrdiff_t mm = static_cast<std::ptrdiff_t>(m);
  if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i) {
      static thread_local std::vector<double> row;
      row.assign(n, 0.0);
      const double* arow = a + static_cast<std::size_t>(i) * k;
      for (std::size_t l = 0; l < k; ++l) {
        const double av = arow[l];
        const double* brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
      }
      double* crow = c + static_cast<std::size_t>(i) * n;
      if (accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += row[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] = row[j];
      }
    }
  } else if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i) {
      const double* arow = a + static_cast<std::size_t>(i) * k;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += arow[l] * brow[l];
        crow[j] = accumulate ? crow[j] + s : s;
      }
    }
  } else if (trans_a && !trans_b) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i) {
      static thread_local std::vector<double> row;
      row.assign(n, 0.0);
      for (std::size_t l = 0; l < k; ++l) {
        const double av = a[l * m + static_cast<std::size_t>(i)];
        const double* brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
      }
      double* crow = c + static_cast<std::size_t>(i) * n;
      if (accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += row[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] = row[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i) {
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l)
          s += a[l * m + static_cast<std::size_t>(i)] * b[j * k + l];
        crow[j] = accumulate ? crow[j] + s : s;
      }
    }
  }
}

void conv1d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t t_in,
                    std::size_t c_out, std::size_t k,
                    std::size_t stride, std::size_t pad) {
  const std::size_t t_out = conv_out_len(t_in, k, stride, pad);
  const std::ptrdiff_t co = static_cast<std::ptrdiff_t>(c_out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < co; ++o) {
    for (std::size_t t = 0; t < t_out; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < c_in; ++i) {
        const double* krow = ker + (static_cast<std::size_t>(o) * c_in + i) * k;
        const double* irow = in + i * t_in;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + kk) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(t_in)) s += irow[src] * krow[kk];
        }
      }
      out[static_cast<std::size_t>(o) * t_out + t] = s;
    }
  }
}

void conv1d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t t_in,
                       std::size_t c_out, std::size_t k,
                       std::size_t stride, std::size_t pad) {
  const std::size_t t_out = conv_out_len(t_in, k, stride, pad);
  const std::ptrdiff_t ci = static_cast<std::ptrdiff_t>(c_in);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ci; ++i) {
    for (std::size_t t = 0; t < t_in; ++t) {
      double s = 0.0;
      for (std::size_t o = 0; o < c_out; ++o) {
        const double* krow = ker + (o * c_in + static_cast<std::size_t>(i)) * k;
        const double* grow = gout + o * t_out;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t num = static_cast<std::ptrdiff_t>(t + pad) -
                                     static_cast<std::ptrdiff_t>(kk);
          if (num < 0 || num % static_cast<std::ptrdiff_t>(stride) != 0) continue;
          const std::ptrdiff_t tp = num / static_cast<std::ptrdiff_t>(stride);
          if (tp < static_cast<std::ptrdiff_t>(t_out)) s += grow[tp] * krow[kk];
        }
      }
      grad_in[static_cast<std::size_t>(i) * t_in + t] += s;
    }
  }
}

void conv1d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t t_in,
                        std::size_t c_out, std::size_t k,
                        std::size_t stride, std::size_t pad) {
  const std::size_t t_out = conv_out_len(t_in, k, stride, pad);
  const std::ptrdiff_t co = static_cast<std::ptrdiff_t>(c_out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < co; ++o) {
    const double* grow = gout + static_cast<std::size_t>(o) * t_out;
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* irow = in + i * t_in;
      for (std::size_t kk = 0; kk < k; ++kk) {
        double s = 0.0;
        for (std::size_t t = 0; t < t_out; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + kk) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(t_in)) s += grow[t] * irow[src];
        }
        grad_ker[(static_cast<std::size_t>(o) * c_in + i) * k + kk] += s;
      }
    }
  }
}

void conv2d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t h, std::size_t w,
                    std::size_t c_out, std::size_t kh, std::size_t kw,
                    std::size_t stride, std::size_t pad) {
  const std::size_t ho = conv_out_len(h, kh, stride, pad);
  const std::size_t wo = conv_out_len(w, kw, stride, pad);
  const std::ptrdiff_t co = static_cast<std::ptrdiff_t>(c_out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < co; ++o) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        double s = 0.0;
        for (std::size_t i = 0; i < c_in; ++i) {
          const double* kbase = ker + ((static_cast<std::size_t>(o) * c_in + i) * kh) * kw;
          const double* ibase = in + i * h * w;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              s += ibase[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)] *
                   kbase[ky * kw + kx];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * ho + y) * wo + x] = s;
      }
    }
  }
}

void conv2d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t h, std::size_t w,
                       std::size_t c_out, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad) {
  const std::size_t ho = conv_out_len(h, kh, stride, pad);
  const std::size_t wo = conv_out_len(w, kw, stride, pad);
  const std::ptrdiff_t ci = static_cast<std::ptrdiff_t>(c_in);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ci; ++i) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t o = 0; o < c_out; ++o) {
          const double* kbase = ker + ((o * c_in + static_cast<std::size_t>(i)) * kh) * kw;
          const double* gbase = gout + o * ho * wo;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y + pad) -
                                      static_cast<std::ptrdiff_t>(ky);
            if (ny < 0 || ny % static_cast<std::ptrdiff_t>(stride) != 0) continue;
            const std::ptrdiff_t ty = ny / static_cast<std::ptrdiff_t>(stride);
            if (ty >= static_cast<std::ptrdiff_t>(ho)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x + pad) -
                                        static_cast<std::ptrdiff_t>(kx);
              if (nx < 0 || nx % static_cast<std::ptrdiff_t>(stride) != 0) continue;
              const std::ptrdiff_t tx = nx / static_cast<std::ptrdiff_t>(stride);
              if (tx >= static_cast<std::ptrdiff_t>(wo)) continue;
              s += gbase[static_cast<std::size_t>(ty) * wo + static_cast<std::size_t>(tx)] *
                   kbase[ky * kw + kx];
            }
          }
        }
        grad_in[(static_cast<std::size_t>(i) * h + y) * w + x] += s;
      }
    }
  }
}

void conv2d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t h, std::size_t w,
                        std::size_t c_out, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad) {
  const std::size_t ho = conv_out_len(h, kh, stride, pad);
  const std::size_t wo = conv_out_len(w, kw, stride, pad);
  const std::ptrdiff_t co = static_cast<std::ptrdiff_t>(c_out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < co; ++o) {
    const double* gbase = gout + static_cast<std::size_t>(o) * ho * wo;
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* ibase = in + i * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          double s = 0.0;
          for (std::size_t y = 0; y < ho; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t x = 0; x < wo; ++x) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              s += gbase[y * wo + x] *
                   ibase[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
            }
          }
          grad_ker[((static_cast<std::size_t>(o) * c_in + i) * kh + ky) * kw + kx] += s;
        }
      }
    }
  }
}

}  // namespace avtenet::kernels

namespace avtenet::refkernels {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        const double av = trans_a ? a[l * m + i] : a[i * k + l];
        const double bv = trans_b ? b[j * k + l] : b[l * n + j];
        s += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void conv1d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t t_in,
                    std::size_t c_out, std::size_t k,
                    std::size_t stride, std::size_t pad) {
  const std::size_t t_out = conv_out_len(t_in, k, stride, pad);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t t = 0; t < t_out; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < c_in; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + kk) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(t_in))
            s += in[i * t_in + static_cast<std::size_t>(src)] * ker[(o * c_in + i) * k + kk];
        }
      }
      out[o * t_out + t] = s;
    }
  }
}

void conv1d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t t_in,
                       std::size_t c_out, std::size_t k,
                       std::size_t stride, std::size_t pad) {
  const std::size_t t_out = conv_out_len(t_in, k, stride, pad);
  for (std::size_t i = 0; i < c_in; ++i) {
    for (std::size_t t = 0; t < t_in; ++t) {
      double s = 0.0;
      for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t num = static_cast<std::ptrdiff_t>(t + pad) -
                                     static_cast<std::ptrdiff_t>(kk);
          if (num < 0 || num % static_cast<std::ptrdiff_t>(stride) != 0) continue;
          const std::ptrdiff_t tp = num / static_cast<std::ptrdiff_t>(stride);
          if (tp < static_cast<std::ptrdiff_t>(t_out))
            s += gout[o * t_out + static_cast<std::size_t>(tp)] * ker[(o * c_in + i) * k + kk];
        }
      }
      grad_in[i * t_in + t] += s;
    }
  }
}

void conv1d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t t_in,
                        std::size_t c_out, std::size_t k,
                        std::size_t stride, std::size_t pad) {
  const std::size_t t_out = conv_out_len(t_in, k, stride, pad);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t i = 0; i < c_in; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        double s = 0.0;
        for (std::size_t t = 0; t < t_out; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + kk) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(t_in))
            s += gout[o * t_out + t] * in[i * t_in + static_cast<std::size_t>(src)];
        }
        grad_ker[(o * c_in + i) * k + kk] += s;
      }
    }
  }
}

void conv2d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t h, std::size_t w,
                    std::size_t c_out, std::size_t kh, std::size_t kw,
                    std::size_t stride, std::size_t pad) {
  const std::size_t ho = conv_out_len(h, kh, stride, pad);
  const std::size_t wo = conv_out_len(w, kw, stride, pad);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        double s = 0.0;
        for (std::size_t i = 0; i < c_in; ++i) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              s += in[(i * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] *
                   ker[((o * c_in + i) * kh + ky) * kw + kx];
            }
          }
        }
        out[(o * ho + y) * wo + x] = s;
      }
    }
  }
}

void conv2d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t h, std::size_t w,
                       std::size_t c_out, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad) {
  const std::size_t ho = conv_out_len(h, kh, stride, pad);
  const std::size_t wo = conv_out_len(w, kw, stride, pad);
  for (std::size_t i = 0; i < c_in; ++i) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t o = 0; o < c_out; ++o) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y + pad) -
                                      static_cast<std::ptrdiff_t>(ky);
            if (ny < 0 || ny % static_cast<std::ptrdiff_t>(stride) != 0) continue;
            const std::ptrdiff_t ty = ny / static_cast<std::ptrdiff_t>(stride);
            if (ty >= static_cast<std::ptrdiff_t>(ho)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x + pad) -
                                        static_cast<std::ptrdiff_t>(kx);
              if (nx < 0 || nx % static_cast<std::ptrdiff_t>(stride) != 0) continue;
              const std::ptrdiff_t tx = nx / static_cast<std::ptrdiff_t>(stride);
              if (tx >= static_cast<std::ptrdiff_t>(wo)) continue;
              s += gout[(o * ho + static_cast<std::size_t>(ty)) * wo + static_cast<std::size_t>(tx)] *
                   ker[((o * c_in + i) * kh + ky) * kw + kx];
            }
          }
        }
        grad_in[(i * h + y) * w + x] += s;
      }
    }
  }
}

void conv2d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t h, std::size_t w,
                        std::size_t c_out, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad) {
  const std::size_t ho = conv_out_len(h, kh, stride, pad);
  const std::size_t wo = conv_out_len(w, kw, stride, pad);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t i = 0; i < c_in; ++i) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          double s = 0.0;
          for (std::size_t y = 0; y < ho; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t x = 0; x < wo; ++x) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              s += gout[(o * ho + y) * wo + x] *
                   in[(i * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
            }
          }
          grad_ker[((o * c_in + i) * kh + ky) * kw + kx] += s;
        }
      }
    }
  }
}

}  // namespace avtenet::refkernels
