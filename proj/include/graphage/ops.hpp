#pragma once

#include <vector>

#include "graphage/rng.hpp"
#include "graphage/tensor.hpp"

namespace graphage {

// Differentiable tensor operations. Each op computes its forward value, and,
// when a Tape is active and an input requires grad, records a backward step
// that accumulates into the inputs' grad buffers.

// elementwise, same shape
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
// x scaled by a (differentiable) scalar tensor, e.g. a learnable coefficient
Tensor scale_by(const Tensor& x, const Tensor& s);

Tensor matmul(const Tensor& a, const Tensor& b);  // [r,k] x [k,c] -> [r,c]

Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor hinge_pos(const Tensor& x);  // elementwise max(x, 0), subgradient 0 at the kink
Tensor hinge_neg(const Tensor& x);  // elementwise min(x, 0), subgradient 0 at the kink

// Inverted dropout: training mode zeroes each element with probability rate
// and scales survivors by 1/(1-rate); eval mode is the identity.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

// Valid cross-correlation of image [h,w,c] with kernels [k,k,c,f].
Tensor conv2d(const Tensor& image, const Tensor& kernels, std::size_t stride = 1);

// Numerically stable softmax within each index group. Groups must partition
// the indices of `scores`; the output sums to 1 within every group.
Tensor softmax_groups(const Tensor& scores, const std::vector<std::vector<std::size_t>>& groups);

Tensor concat_cols(const Tensor& a, const Tensor& b);        // [n,p] ++ [n,q] -> [n,p+q]
Tensor vstack(const std::vector<Tensor>& rows);              // stack [mi,d] blocks -> [sum mi, d]
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices);
Tensor scale_rows(const Tensor& x, const Tensor& s);         // row i of x times s[i]

Tensor sum(const Tensor& x);   // -> [1]
Tensor mean(const Tensor& x);  // -> [1]
Tensor colwise_mean(const Tensor& x);  // [m,d] -> [1,d]
Tensor colwise_max(const Tensor& x);   // [m,d] -> [1,d], grad routed to the argmax
Tensor spatial_mean(const Tensor& x);  // [h,w,c] -> [1,c]

// per-row squared Euclidean distance, [n,d] x [n,d] -> [n]
Tensor row_distance_sq(const Tensor& a, const Tensor& b);

// Zero out the listed feature rows; gradient is blocked on those rows.
Tensor mask_zero_rows(const Tensor& x, const std::vector<std::size_t>& rows);

Tensor reshape(const Tensor& x, Shape new_shape);

// Max over all input elements of |analytic - central difference| / max(|a|,|cd|,1e-8)
// for a scalar-valued function of the given inputs. The function must be
// deterministic (re-seed any internal randomness on every call).
double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  std::vector<Tensor>& inputs, double eps = 1e-5);

}  // namespace graphage
