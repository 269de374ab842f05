#include "vitreforge/reparam.hpp"

#include <algorithm>
#include <cmath>

#include "vitreforge/errors.hpp"
#include "vitreforge/rng.hpp"

namespace vitreforge {

Tensor pool_as_conv(std::int64_t channels, int k) {
    if (channels < 1 || k < 1) throw ShapeError("pool_as_conv: channels and k must be >= 1");
    Tensor w({channels, channels, k, k});
    const float v = 1.0f / static_cast<float>(k * k);
    const std::int64_t kk = static_cast<std::int64_t>(k) * k;
    for (std::int64_t c = 0; c < channels; ++c) {
        float* plane = w.data.data() + (c * channels + c) * kk;
        for (std::int64_t i = 0; i < kk; ++i) plane[i] = v;
    }
    return w;
}

Downsampler merge(const Downsampler& branched) {
    if (branched.merged) throw ConfigError("downsampler is already merged");
    if (branched.conv_w.rank() != 4 || branched.conv_w.dim(2) != 3 || branched.conv_w.dim(3) != 3 ||
        branched.conv_w.dim(0) != branched.conv_w.dim(1)) {
        throw ConfigError("merge expects a [C,C,3,3] conv kernel matching the 3x3 pool, got " +
                          shape_str(branched.conv_w.shape));
    }
    Downsampler out;
    out.conv_w = add(branched.conv_w, pool_as_conv(branched.conv_w.dim(0), 3));
    out.conv_b = branched.conv_b;
    out.merged = true;
    return out;
}

MergeReport verify_merge(const Downsampler& branched, const Downsampler& merged, int trials,
                         float tol, std::uint64_t seed, std::int64_t h, std::int64_t w) {
    if (trials < 1) throw ConfigError("verify_merge: trials must be >= 1");
    if (branched.merged) throw ConfigError("verify_merge: first argument must be the branched form");
    if (!merged.merged) throw ConfigError("verify_merge: second argument must be the merged form");
    const std::int64_t c = branched.conv_w.dim(0);
    Rng rng(seed);
    MergeReport report;
    report.trials = trials;
    Downsampler branched_form = branched;  // ensure branched evaluation path
    branched_form.merged = false;
    for (int t = 0; t < trials; ++t) {
        Tensor x({c, h, w});
        for (float& v : x.data) v = rng.normal();
        Tensor a = stage_downsample(x, branched_form);
        Tensor b = stage_downsample(x, merged);
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            report.max_abs_diff = std::max(report.max_abs_diff, std::fabs(a.data[i] - b.data[i]));
        }
    }
    report.pass = report.max_abs_diff < tol;
    return report;
}

}  // namespace vitreforge
