#include "vitreforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace vitreforge {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void check_shape_positive(const std::vector<std::int64_t>& shape) {
    for (std::int64_t d : shape) {
        if (d <= 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    check_shape_positive(shape);
    data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
}

Tensor::Tensor(std::vector<std::int64_t> s, std::vector<float> d)
    : shape(std::move(s)), data(std::move(d)) {
    check_shape_positive(shape);
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::full(std::vector<std::int64_t> s, float v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

Tensor Tensor::reshaped(std::vector<std::int64_t> s) const {
    if (shape_numel(s) != numel()) {
        throw ShapeError("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
    }
    return Tensor(std::move(s), data);
}

// Blocked SGEMM. Tiles chosen so the c sub-block stays L1-resident; the
// reduction over t is ascending for each (i,j), which together with
// -ffp-contract=off makes results bit-identical to the naive triple loop.
Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape) + " x " +
                         shape_str(b.shape));
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape) + " x " +
                         shape_str(b.shape));
    }
    Tensor c({m, n});
    const float* pa = a.data.data();
    const float* pb = b.data.data();
    float* pc = c.data.data();

    constexpr std::int64_t BI = 16;
    constexpr std::int64_t BJ = 256;
    for (std::int64_t i0 = 0; i0 < m; i0 += BI) {
        const std::int64_t iend = std::min(i0 + BI, m);
        for (std::int64_t j0 = 0; j0 < n; j0 += BJ) {
            const std::int64_t jend = std::min(j0 + BJ, n);
            for (std::int64_t t = 0; t < k; ++t) {
                const float* brow = pb + t * n;
                for (std::int64_t i = i0; i < iend; ++i) {
                    const float av = pa[i * k + t];
                    float* crow = pc + i * n;
                    for (std::int64_t j = j0; j < jend; ++j) {
                        crow[j] += av * brow[j];
                    }
                }
            }
        }
    }
    return c;
}

namespace {

std::int64_t pooled_extent(std::int64_t in, int k, int stride, int pad, const char* what) {
    const std::int64_t padded = in + 2 * static_cast<std::int64_t>(pad);
    if (k > padded) {
        throw ShapeError(std::string(what) + ": kernel " + std::to_string(k) +
                         " larger than padded input extent " + std::to_string(padded));
    }
    return (padded - k) / stride + 1;
}

void check_chw(const Tensor& x, const char* what) {
    if (x.rank() != 3) {
        throw ShapeError(std::string(what) + " expects [C,H,W], got " + shape_str(x.shape));
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad) {
    check_chw(x, "conv2d");
    if (w.rank() != 4) {
        throw ShapeError("conv2d expects weight [Cout,Cin,kh,kw], got " + shape_str(w.shape));
    }
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (pad < 0) throw ShapeError("conv2d: pad must be >= 0");
    const std::int64_t cin = x.dim(0), h = x.dim(1), win = x.dim(2);
    const std::int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != cin) {
        throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                         " do not match weight " + shape_str(w.shape));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
        throw ShapeError("conv2d: bias shape " + shape_str(bias->shape) + " does not match Cout " +
                         std::to_string(cout));
    }
    const std::int64_t oh = pooled_extent(h, static_cast<int>(kh), stride, pad, "conv2d");
    const std::int64_t ow = pooled_extent(win, static_cast<int>(kw), stride, pad, "conv2d");
    const std::int64_t nout = oh * ow;
    const std::int64_t kvol = cin * kh * kw;

    // im2col transposed: patches [kvol, nout], taps ordered (ci,ky,kx) so the
    // matmul reduction visits them in the same order as a naive conv loop.
    Tensor patches({kvol, nout});
    float* pp = patches.data.data();
    const float* px = x.data.data();
    std::int64_t t = 0;
    for (std::int64_t ci = 0; ci < cin; ++ci) {
        for (std::int64_t ky = 0; ky < kh; ++ky) {
            for (std::int64_t kx = 0; kx < kw; ++kx, ++t) {
                float* prow = pp + t * nout;
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const std::int64_t iy = oy * stride + ky - pad;
                    float* pdst = prow + oy * ow;
                    if (iy < 0 || iy >= h) {
                        std::memset(pdst, 0, static_cast<std::size_t>(ow) * sizeof(float));
                        continue;
                    }
                    const float* xrow = px + (ci * h + iy) * win;
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const std::int64_t ix = ox * stride + kx - pad;
                        pdst[ox] = (ix < 0 || ix >= win) ? 0.0f : xrow[ix];
                    }
                }
            }
        }
    }

    Tensor out = matmul(w.reshaped({cout, kvol}), patches);
    out.shape = {cout, oh, ow};
    if (bias) {
        float* po = out.data.data();
        for (std::int64_t co = 0; co < cout; ++co) {
            const float bv = bias->data[static_cast<std::size_t>(co)];
            for (std::int64_t i = 0; i < nout; ++i) po[co * nout + i] += bv;
        }
    }
    return out;
}

Tensor avg_pool2d(const Tensor& x, int k, int stride, int pad) {
    check_chw(x, "avg_pool2d");
    if (stride < 1) throw ShapeError("avg_pool2d: stride must be >= 1");
    if (pad < 0) throw ShapeError("avg_pool2d: pad must be >= 0");
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::int64_t oh = pooled_extent(h, k, stride, pad, "avg_pool2d");
    const std::int64_t ow = pooled_extent(w, k, stride, pad, "avg_pool2d");
    Tensor out({c, oh, ow});
    const float inv = 1.0f / static_cast<float>(k * k);
    const float* px = x.data.data();
    float* po = out.data.data();
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                float sum = 0.0f;
                for (int ky = 0; ky < k; ++ky) {
                    const std::int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    const float* xrow = px + (ci * h + iy) * w;
                    for (int kx = 0; kx < k; ++kx) {
                        const std::int64_t ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        sum += xrow[ix];
                    }
                }
                po[(ci * oh + oy) * ow + ox] = sum * inv;
            }
        }
    }
    return out;
}

Tensor max_pool2d(const Tensor& x, int k, int stride) {
    check_chw(x, "max_pool2d");
    if (stride < 1) throw ShapeError("max_pool2d: stride must be >= 1");
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::int64_t oh = pooled_extent(h, k, stride, 0, "max_pool2d");
    const std::int64_t ow = pooled_extent(w, k, stride, 0, "max_pool2d");
    Tensor out({c, oh, ow});
    const float* px = x.data.data();
    float* po = out.data.data();
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                for (int ky = 0; ky < k; ++ky) {
                    const float* xrow = px + (ci * h + oy * stride + ky) * w;
                    for (int kx = 0; kx < k; ++kx) {
                        best = std::max(best, xrow[ox * stride + kx]);
                    }
                }
                po[(ci * oh + oy) * ow + ox] = best;
            }
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (x.rank() < 1) throw ShapeError("layer_norm expects rank >= 1");
    if (eps <= 0.0f) throw ShapeError("layer_norm: eps must be > 0");
    const std::int64_t d = x.dim(x.rank() - 1);
    if (gamma.numel() != d || beta.numel() != d) {
        throw ShapeError("layer_norm: gamma/beta length must equal last dim " + std::to_string(d));
    }
    Tensor out(x.shape);
    const std::int64_t slices = x.numel() / d;
    const float* px = x.data.data();
    const float* pg = gamma.data.data();
    const float* pbt = beta.data.data();
    float* po = out.data.data();
    const float invd = 1.0f / static_cast<float>(d);
    for (std::int64_t s = 0; s < slices; ++s) {
        const float* row = px + s * d;
        float* orow = po + s * d;
        float mean = 0.0f;
        for (std::int64_t i = 0; i < d; ++i) mean += row[i];
        mean *= invd;
        float var = 0.0f;
        for (std::int64_t i = 0; i < d; ++i) {
            const float diff = row[i] - mean;
            var += diff * diff;
        }
        var *= invd;
        const float inv_std = 1.0f / std::sqrt(var + eps);
        for (std::int64_t i = 0; i < d; ++i) {
            orow[i] = (row[i] - mean) * inv_std * pg[i] + pbt[i];
        }
    }
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0) axis += x.rank();
    if (axis < 0 || axis >= x.rank()) {
        throw ShapeError("softmax: axis out of range for " + shape_str(x.shape));
    }
    const std::int64_t d = x.dim(axis);
    std::int64_t inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    const std::int64_t outer = x.numel() / (d * inner);
    Tensor out(x.shape);
    const float* px = x.data.data();
    float* po = out.data.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * d * inner + in;
            float m = -std::numeric_limits<float>::infinity();
            for (std::int64_t i = 0; i < d; ++i) m = std::max(m, px[base + i * inner]);
            float sum = 0.0f;
            for (std::int64_t i = 0; i < d; ++i) {
                const float e = std::exp(px[base + i * inner] - m);
                po[base + i * inner] = e;
                sum += e;
            }
            const float inv = 1.0f / sum;
            for (std::int64_t i = 0; i < d; ++i) po[base + i * inner] *= inv;
        }
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const float v = x.data[i];
        out.data[i] = v * 0.5f * (1.0f + std::erf(v * 0.70710678118654752440f));
    }
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    check_chw(x, "global_avg_pool");
    const std::int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out({c});
    const float inv = 1.0f / static_cast<float>(hw);
    for (std::int64_t ci = 0; ci < c; ++ci) {
        float sum = 0.0f;
        const float* row = x.data.data() + ci * hw;
        for (std::int64_t i = 0; i < hw; ++i) sum += row[i];
        out.data[static_cast<std::size_t>(ci)] = sum * inv;
    }
    return out;
}

Tensor transpose2d(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose2d expects rank 2, got " + shape_str(a.shape));
    const std::int64_t m = a.dim(0), n = a.dim(1);
    Tensor out({n, m});
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            out.data[static_cast<std::size_t>(j * m + i)] = a.data[static_cast<std::size_t>(i * n + j)];
        }
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& wt, const Tensor* b) {
    Tensor y = matmul(x, wt);
    if (b) {
        const std::int64_t m = y.dim(0), n = y.dim(1);
        if (b->numel() != n) {
            throw ShapeError("linear: bias length " + std::to_string(b->numel()) +
                             " does not match output dim " + std::to_string(n));
        }
        for (std::int64_t i = 0; i < m; ++i) {
            float* row = y.data.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) row[j] += b->data[static_cast<std::size_t>(j)];
        }
    }
    return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shapes differ " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shapes differ " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Tensor map_to_tokens(const Tensor& x) {
    check_chw(x, "map_to_tokens");
    const std::int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor t({hw, c});
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const float* src = x.data.data() + ci * hw;
        for (std::int64_t p = 0; p < hw; ++p) t.data[static_cast<std::size_t>(p * c + ci)] = src[p];
    }
    return t;
}

Tensor tokens_to_map(const Tensor& t, std::int64_t h, std::int64_t w) {
    if (t.rank() != 2 || t.dim(0) != h * w) {
        throw ShapeError("tokens_to_map: tokens " + shape_str(t.shape) + " do not cover " +
                         std::to_string(h) + "x" + std::to_string(w));
    }
    const std::int64_t c = t.dim(1), hw = h * w;
    Tensor x({c, h, w});
    for (std::int64_t p = 0; p < hw; ++p) {
        const float* src = t.data.data() + p * c;
        for (std::int64_t ci = 0; ci < c; ++ci) x.data[static_cast<std::size_t>(ci * hw + p)] = src[ci];
    }
    return x;
}

}  // namespace vitreforge
