#pragma once

#include <array>
#include <string>

#include "vitreforge/tensor.hpp"

namespace vitreforge {

// ImageNet-convention normalization constants (a convention, not a
// property of the checkpoints; override via CLI flags).
inline constexpr std::array<float, 3> kDefaultMean = {0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kDefaultStd = {0.229f, 0.224f, 0.225f};

// Binary PPM (P6, maxval 255) -> [3,H,W] RGB in [0,1].
Tensor decode_ppm(const std::string& path);

// Writes a [3,H,W] tensor in [0,1] as P6 (values clamped and rounded).
void encode_ppm(const Tensor& img, const std::string& path);

// per-channel (x - mean) / std
void normalize_image(Tensor& img, const std::array<float, 3>& mean, const std::array<float, 3>& std);

}  // namespace vitreforge
