#pragma once

#include <cstdint>
#include <vector>

#include "vitreforge/errors.hpp"

namespace vitreforge {

// Dense rank-N array of f32, row-major. The one value type every other
// module traffics in. All kernels below are pure functions, deterministic
// (per-output-element accumulation order is fixed), and safe to call
// concurrently.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s);
    Tensor(std::vector<std::int64_t> s, std::vector<float> d);

    static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<std::int64_t> s, float v);

    std::int64_t numel() const;
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    // same data, new shape (element count must match)
    Tensor reshaped(std::vector<std::int64_t> s) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);
std::string shape_str(const std::vector<std::int64_t>& shape);

// c[i,j] = sum_t a[i,t]*b[t,j], t ascending for every output element.
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation (no kernel flip), zero padding.
// x [Cin,H,W], w [Cout,Cin,kh,kw], bias [Cout] or nullptr.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad);

// Count-include-pad average pooling: divisor is always k*k, so the op is
// exactly expressible as a fixed convolution (see reparam.hpp).
Tensor avg_pool2d(const Tensor& x, int k, int stride, int pad);

// Max over k*k windows, no padding.
Tensor max_pool2d(const Tensor& x, int k, int stride);

// Normalizes over the last axis; biased variance (divide by d).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, int axis);

// Exact erf-based GELU: x * Phi(x).
Tensor gelu(const Tensor& x);

// Per-channel mean over all spatial positions: [C,H,W] -> [C].
Tensor global_avg_pool(const Tensor& x);

// [m,n] -> [n,m]
Tensor transpose2d(const Tensor& a);

// y = x * wt + b where wt is the already-transposed weight [in,out];
// b may be nullptr.
Tensor linear(const Tensor& x, const Tensor& wt, const Tensor* b);

// elementwise sum (shapes must match)
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

// [C,H,W] channel map <-> [H*W,C] row-major token matrix
Tensor map_to_tokens(const Tensor& x);
Tensor tokens_to_map(const Tensor& t, std::int64_t h, std::int64_t w);

}  // namespace vitreforge
