#pragma once

#include <string>
#include <vector>

#include "vitreforge/nta.hpp"

namespace vitreforge {

// Inferred description of a plain ViT checkpoint. Canonical key scheme
// (timm-style):
//
//   patch_embed.proj.weight [dim,3,p,p]    patch_embed.proj.bias [dim]
//   pos_embed [1, N(+1), dim]              cls_token [1,1,dim] (optional)
//   blocks.{i}.norm1.{weight,bias}
//   blocks.{i}.attn.qkv.{weight [3*dim,dim], bias [3*dim]}
//   blocks.{i}.attn.proj.{weight [dim,dim], bias [dim]}
//   blocks.{i}.norm2.{weight,bias}
//   blocks.{i}.mlp.fc1.{weight [hidden,dim], bias [hidden]}
//   blocks.{i}.mlp.fc2.{weight [dim,hidden], bias [dim]}
//   norm.{weight,bias}
//   head.{weight [classes,dim], bias [classes]} (optional)
//
// The head count is not recoverable from tensor shapes alone, so it comes
// from archive metadata "heads" when present and falls back to the
// 64-per-head convention of the ViT family.
struct PlainVitSchema {
    int depth = 0;
    int dim = 0;
    int heads = 0;
    int patch = 0;
    int img = 0;
    int mlp_hidden = 0;
    float mlp_ratio = 0.0f;
    int n_classes = 0;  // 0: no classifier in archive
    bool has_cls_token = false;
    bool pos_has_cls_slot = false;
    float norm_eps = 1e-6f;

    int grid() const { return img / patch; }
    int tokens() const { return grid() * grid(); }
    int head_dim() const { return dim / heads; }
};

PlainVitSchema validate_plain_vit(const NamedTensorArchive& a);

// blocks.{i}.{suffix}
std::string block_key(int block, const std::string& suffix);

// The 12 per-block key suffixes in canonical order.
const std::vector<std::string>& block_key_suffixes();

}  // namespace vitreforge
