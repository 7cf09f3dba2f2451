#pragma once

#include <cstddef>

// Dense numeric kernels. avtenet::kernels is the OpenMP-parallel production
// set; avtenet::refkernels is a naive serial twin with identical signatures.
// Both accumulate each output element in the same order, so their results are
// bit-identical at any thread count (the core library is compiled with
// -ffp-contract=off to keep that true under vectorization).

namespace avtenet::kernels {

// c[m x n] = (or +=) op(a) * op(b).
//   a is m x k, or k x m when trans_a; b is k x n, or n x k when trans_b.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate);

// 1-D cross-correlation. in: c_in x t_in, ker: c_out x c_in x k,
// out: c_out x t_out with t_out = (t_in + 2*pad - k) / stride + 1.
void conv1d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t t_in,
                    std::size_t c_out, std::size_t k,
                    std::size_t stride, std::size_t pad);
// grad_in accumulates; shapes as in forward, gout is c_out x t_out.
void conv1d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t t_in,
                       std::size_t c_out, std::size_t k,
                       std::size_t stride, std::size_t pad);
// grad_ker accumulates.
void conv1d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t t_in,
                        std::size_t c_out, std::size_t k,
                        std::size_t stride, std::size_t pad);

// 2-D cross-correlation. in: c_in x h x w, ker: c_out x c_in x kh x kw,
// out: c_out x h_out x w_out, h_out = (h + 2*pad - kh) / stride + 1 (same for w).
void conv2d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t h, std::size_t w,
                    std::size_t c_out, std::size_t kh, std::size_t kw,
                    std::size_t stride, std::size_t pad);
void conv2d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t h, std::size_t w,
                       std::size_t c_out, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad);
void conv2d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t h, std::size_t w,
                        std::size_t c_out, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad);

}  // namespace avtenet::kernels

namespace avtenet::refkernels {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate);
void conv1d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t t_in,
                    std::size_t c_out, std::size_t k,
                    std::size_t stride, std::size_t pad);
void conv1d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t t_in,
                       std::size_t c_out, std::size_t k,
                       std::size_t stride, std::size_t pad);
void conv1d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t t_in,
                        std::size_t c_out, std::size_t k,
                        std::size_t stride, std::size_t pad);
void conv2d_forward(const double* in, const double* ker, double* out,
                    std::size_t c_in, std::size_t h, std::size_t w,
                    std::size_t c_out, std::size_t kh, std::size_t kw,
                    std::size_t stride, std::size_t pad);
void conv2d_grad_input(const double* gout, const double* ker, double* grad_in,
                       std::size_t c_in, std::size_t h, std::size_t w,
                       std::size_t c_out, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad);
void conv2d_grad_kernel(const double* gout, const double* in, double* grad_ker,
                        std::size_t c_in, std::size_t h, std::size_t w,
                        std::size_t c_out, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad);

}  // namespace avtenet::refkernels
