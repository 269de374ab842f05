#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitreforge/hier_vit.hpp"

namespace vitreforge {

// Analytic cost model. Attention splits into the projection-free
// score/aggregate part (2*N^2*dim for the scores plus 2*N^2*dim for value
// aggregation) and the projections (qkv + output, 8*N*dim^2 per block).
// Convolutions cost 2*Cout*Cin*kh*kw*Hout*Wout multiply-adds counted as
// two flops each; bias adds are not counted.
struct AttentionFlops {
    std::int64_t score_aggregate = 0;
    std::int64_t projections = 0;
    std::int64_t total() const { return score_aggregate + projections; }
};

AttentionFlops global_attention_flops(std::int64_t n_tokens, std::int64_t dim);

// Window attention on an h x w map: per-window token count is ws^2 and the
// window count comes from the padded grid. Projections still run over all
// h*w tokens.
AttentionFlops window_attention_flops(std::int64_t h, std::int64_t w, int ws, std::int64_t dim);

std::int64_t conv2d_flops(std::int64_t cout, std::int64_t cin, std::int64_t kh, std::int64_t kw,
                          std::int64_t hout, std::int64_t wout);

std::int64_t mlp_flops(std::int64_t n_tokens, std::int64_t dim, std::int64_t hidden);

struct StageCost {
    std::string label;
    std::int64_t conv = 0;
    std::int64_t attn_score_aggregate = 0;
    std::int64_t attn_projections = 0;
    std::int64_t mlp = 0;
    std::int64_t total() const { return conv + attn_score_aggregate + attn_projections + mlp; }
};

// Per-stage analytic cost of a hierarchical forward at the given input side.
std::vector<StageCost> analyze_hier_flops(const HierModel& m, std::int64_t img_side);

}  // namespace vitreforge
