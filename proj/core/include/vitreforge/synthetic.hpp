#pragma once

#include <cstdint>

#include "vitreforge/nta.hpp"

namespace vitreforge {

// Parameters for a seeded random plain-ViT checkpoint. Weight scales follow
// the usual trunc-normal(0.02) initialization so forwards stay numerically
// tame at test tolerances.
struct SyntheticSpec {
    int depth = 12;
    int dim = 768;
    int heads = 12;
    int patch = 16;
    int img = 224;
    int n_classes = 1000;
    bool cls_token = false;
    bool zero_weights = false;  // zero everything except norm gammas (wiring tests)
    std::uint64_t seed = 42;
};

SyntheticSpec nano_spec(std::uint64_t seed = 42);   // depth 4, dim 8, heads 2, patch 4, img 32
SyntheticSpec vit_b_spec(std::uint64_t seed = 42);  // the full ViT-B shape

NamedTensorArchive make_plain_vit_archive(const SyntheticSpec& spec);

}  // namespace vitreforge
