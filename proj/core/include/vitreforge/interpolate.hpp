#pragma once

#include "vitreforge/tensor.hpp"

namespace vitreforge {

// Separable bicubic resize of a channel-last grid [h,w,C] -> [oh,ow,C].
// Half-pixel coordinate mapping, cubic convolution kernel a=-0.75,
// replicated borders. Resizing to the source size is the identity.
Tensor bicubic_resize_grid(const Tensor& grid, std::int64_t oh, std::int64_t ow);

}  // namespace vitreforge
