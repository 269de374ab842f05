#pragma once

#include <vector>

#include "vitreforge/nta.hpp"
#include "vitreforge/tensor.hpp"
#include "vitreforge/vit_schema.hpp"

namespace vitreforge {

// One transformer block's parameters. Linear weights are kept in the
// checkpoint orientation [out,in] and as pre-transposed copies used by the
// matmul kernels; both carry identical bytes per value.
struct BlockWeights {
    Tensor norm1_w, norm1_b;
    Tensor qkv_w, qkv_b;    // [3*dim, dim], [3*dim]
    Tensor proj_w, proj_b;  // [dim, dim], [dim]
    Tensor norm2_w, norm2_b;
    Tensor fc1_w, fc1_b;    // [hidden, dim], [hidden]
    Tensor fc2_w, fc2_b;    // [dim, hidden], [dim]

    Tensor qkv_wt, proj_wt, fc1_wt, fc2_wt;  // transposed compute forms

    void prepare();  // fills the transposed copies
};

BlockWeights block_weights_from_archive(const NamedTensorArchive& a, int block);

// Reference forward pass of the plain stride-16 encoder. This is the
// equivalence oracle the surgery is proven against.
class PlainVitModel {
public:
    static PlainVitModel from_archive(const NamedTensorArchive& a);

    const PlainVitSchema& schema() const { return schema_; }
    const std::vector<BlockWeights>& blocks() const { return blocks_; }
    const Tensor& patch_weight() const { return patch_w_; }
    const Tensor& patch_bias() const { return patch_b_; }
    const Tensor& pos_embed() const { return pos_embed_; }  // [T, dim]
    const Tensor& final_norm_weight() const { return norm_w_; }
    const Tensor& final_norm_bias() const { return norm_b_; }
    bool has_head() const { return has_head_; }
    const Tensor& head_weight() const { return head_w_; }
    const Tensor& head_bias() const { return head_b_; }
    bool has_cls_token() const { return has_cls_; }
    const Tensor& cls_token() const { return cls_token_; }
    float norm_eps() const { return schema_.norm_eps; }

    // position rows for an h x w patch grid: bicubic interpolation of the
    // spatial part, cls row (when present) untouched
    Tensor pos_for_grid(std::int64_t h, std::int64_t w) const;

private:
    PlainVitSchema schema_;
    std::vector<BlockWeights> blocks_;
    Tensor patch_w_, patch_b_;
    Tensor pos_embed_;
    Tensor cls_token_;  // [dim] when present
    Tensor norm_w_, norm_b_;
    Tensor head_w_, head_b_;
    bool has_cls_ = false;
    bool has_head_ = false;
};

// Non-overlapping patch embedding: [3,H,W] -> [N,dim] tokens in row-major
// spatial order. H and W must be divisible by the patch size.
Tensor patch_embed_plain(const Tensor& img, const PlainVitModel& m);

// Standard multi-head self-attention over all tokens, scale 1/sqrt(dim/heads).
Tensor global_attention(const Tensor& x, const BlockWeights& bw, int heads);

// Pre-norm block: x + attn(ln1(x)); x + mlp(ln2(x)).
Tensor vit_block(const Tensor& x, const BlockWeights& bw, int heads, float eps);

enum class PlainHead { Tokens, ClsLogits };

// Full encoder: patch embed, position add, blocks, final norm, then either
// the token tensor or mean-pooled logits (cls token excluded from the mean).
Tensor forward_plain(const Tensor& img, const PlainVitModel& m, PlainHead head);

}  // namespace vitreforge
