#pragma once

#include <cstdint>

#include "vitreforge/hier_vit.hpp"
#include "vitreforge/tensor.hpp"

namespace vitreforge {

// The fixed convolution kernel that reproduces count-include-pad average
// pooling: w[o,i,y,x] = 1/k^2 if o==i else 0.
Tensor pool_as_conv(std::int64_t channels, int k);

// Fold the average-pooling branch into the parallel convolution:
// w' = conv_w + pool_as_conv(C,3), b' = conv_b. The result computes the
// same function as the two-branch form (up to float reassociation).
Downsampler merge(const Downsampler& branched);

struct MergeReport {
    float max_abs_diff = 0.0f;
    bool pass = false;
    int trials = 0;
};

// Runs `trials` seeded random inputs of shape [C,h,w] through both forms;
// passes iff the max abs difference stays below tol.
MergeReport verify_merge(const Downsampler& branched, const Downsampler& merged, int trials,
                         float tol, std::uint64_t seed = 0x5eed, std::int64_t h = 14,
                         std::int64_t w = 14);

}  // namespace vitreforge
