#include "vitreforge/interpolate.hpp"

#include <algorithm>
#include <cmath>

namespace vitreforge {

namespace {

double cubic_weight(double t) {
    constexpr double a = -0.75;
    t = std::fabs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

struct Taps {
    std::int64_t idx[4];
    double w[4];
};

// Tap positions and weights for every output coordinate along one axis.
std::vector<Taps> make_taps(std::int64_t n_in, std::int64_t n_out) {
    std::vector<Taps> taps(static_cast<std::size_t>(n_out));
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::int64_t j = 0; j < n_out; ++j) {
        const double src = (static_cast<double>(j) + 0.5) * scale - 0.5;
        const std::int64_t i0 = static_cast<std::int64_t>(std::floor(src));
        const double u = src - static_cast<double>(i0);
        Taps& t = taps[static_cast<std::size_t>(j)];
        for (int k = -1; k <= 2; ++k) {
            t.idx[k + 1] = std::clamp<std::int64_t>(i0 + k, 0, n_in - 1);
            t.w[k + 1] = cubic_weight(static_cast<double>(k) - u);
        }
    }
    return taps;
}

}  // namespace

Tensor bicubic_resize_grid(const Tensor& grid, std::int64_t oh, std::int64_t ow) {
    if (grid.rank() != 3) {
        throw ShapeError("bicubic_resize_grid expects [h,w,C], got " + shape_str(grid.shape));
    }
    const std::int64_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
    if (oh <= 0 || ow <= 0) throw ShapeError("bicubic_resize_grid: target size must be positive");

    const auto col_taps = make_taps(w, ow);
    const auto row_taps = make_taps(h, oh);

    // horizontal pass: [h,w,C] -> [h,ow,C]
    Tensor tmp({h, ow, c});
    for (std::int64_t y = 0; y < h; ++y) {
        const float* src_row = grid.data.data() + y * w * c;
        float* dst_row = tmp.data.data() + y * ow * c;
        for (std::int64_t x = 0; x < ow; ++x) {
            const Taps& t = col_taps[static_cast<std::size_t>(x)];
            float* dst = dst_row + x * c;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += t.w[k] * src_row[t.idx[k] * c + ch];
                dst[ch] = static_cast<float>(acc);
            }
        }
    }

    // vertical pass: [h,ow,C] -> [oh,ow,C]
    Tensor out({oh, ow, c});
    for (std::int64_t y = 0; y < oh; ++y) {
        const Taps& t = row_taps[static_cast<std::size_t>(y)];
        float* dst_row = out.data.data() + y * ow * c;
        for (std::int64_t x = 0; x < ow; ++x) {
            float* dst = dst_row + x * c;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += t.w[k] * tmp.data[(t.idx[k] * ow + x) * c + ch];
                dst[ch] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

}  // namespace vitreforge
