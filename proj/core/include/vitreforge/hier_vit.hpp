#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vitreforge/nta.hpp"
#include "vitreforge/plain_vit.hpp"
#include "vitreforge/tensor.hpp"
#include "vitreforge/vit_schema.hpp"

namespace vitreforge {

enum class AttnKind : std::uint8_t { Window, Global };

struct BlockAttn {
    AttnKind kind = AttnKind::Global;
    int window = 0;  // valid when kind == Window

    static BlockAttn win(int ws) { return {AttnKind::Window, ws}; }
    static BlockAttn global() { return {AttnKind::Global, 0}; }
    bool operator==(const BlockAttn&) const = default;
};

enum class HierHead : std::uint8_t { Classification, Pyramid };

// What happens after the last stage. Classification uses global average
// pooling, segmentation-style backbones use a 2x2/stride-2 max pool, and
// the generic pyramid keeps a learned conv+avg downsampler like the
// inner stages (its parameters exist even though pyramid taps are read
// before it).
enum class FinalStagePool : std::uint8_t { Gap, Max2, Learned };

struct HierVitConfig {
    std::array<int, 4> stage_layout{2, 2, 6, 2};
    std::vector<BlockAttn> window_plan;  // one entry per block
    int embed_stride = 4;
    HierHead head = HierHead::Classification;
    FinalStagePool final_pool = FinalStagePool::Gap;

    // stage_layout from depth, window plan: window(ws) in stages 1-2,
    // global in stages 3-4; final pool follows the head.
    static HierVitConfig defaults(const PlainVitSchema& s,
                                  HierHead head = HierHead::Classification,
                                  int window_size = 7);

    void validate(const PlainVitSchema& s) const;

    int embed_pad(int patch) const { return (patch - embed_stride) / 2; }
    int embed_overlap(int patch) const { return patch - embed_stride; }

    // pyramid tap block indices (1-based cumulative sums of the layout)
    std::array<int, 4> taps() const;
    // stage index (0..3) of a 0-based block index
    int stage_of_block(int block) const;

    std::string to_text() const;
    static HierVitConfig from_text(const std::string& text);
};

// Attention plan used for detection backbones: the baseline keeps four
// evenly spaced global layers; the first of those becomes a window layer
// and the last three stay global.
std::vector<BlockAttn> detection_attention_plan(int depth, int window_size = 7);

// avg-pool branch (fixed) plus a parallel learned 3x3/stride-2 conv.
// After re-parameterization `merged` is set and conv_w alone carries both
// branches.
struct Downsampler {
    Tensor conv_w;  // [C,C,3,3]
    Tensor conv_b;  // [C]
    bool merged = false;
};

struct PadInfo {
    std::int64_t h = 0, w = 0;    // original extents
    std::int64_t ph = 0, pw = 0;  // padded extents (multiples of ws)
};

struct FeaturePyramid {
    Tensor c4, c8, c16, c32;  // strides {4,8,16,32} relative to the input
};

struct HierOutput {
    std::optional<Tensor> logits;
    std::optional<FeaturePyramid> pyramid;
};

// The transformed hierarchical model. Every encoder tensor of the source
// archive is carried byte-identically; the only new parameters are the
// downsampler convs (zero-initialized) and one relative-position-bias
// table per window block (zero-initialized).
class HierModel {
public:
    HierVitConfig cfg;
    PlainVitSchema schema;
    std::vector<BlockWeights> blocks;
    Tensor patch_w, patch_b;
    Tensor pos_src;              // original [T,dim] rows, as stored
    Tensor cls_src;              // [dim] when the source had a class token
    bool has_cls = false;
    Tensor pos_grid;             // [dim, g4, g4] interpolated for schema.img
    std::vector<Downsampler> downsamplers;  // 3, +1 when final_pool==Learned
    std::vector<Tensor> bias_tables;        // per block; empty for global blocks
    Tensor norm_w, norm_b;
    Tensor head_w, head_b;
    bool has_head = false;

    // position map for an h x w 1/4-grid, interpolated from the source
    // 1/16 grid (never from an already-interpolated grid)
    Tensor pos_map_for(std::int64_t h, std::int64_t w) const;

    int n_window_blocks() const;
};

// Weight surgery: plain archive -> hierarchical model. Block weights and
// the patch projection are reused verbatim; the position embedding is
// bicubically interpolated to the 1/4 grid (class-token row discarded);
// all new parameters start at zero so the fresh model computes exactly
// the function of its pre-trained weights.
HierModel surgery(const NamedTensorArchive& plain, const HierVitConfig& cfg);

// Overlapping patch embedding: the pre-trained 16x16 kernel applied at
// stride 4 with pad 6 -> [dim, H/4, W/4]. Passing stride=patch, pad=0
// degenerates to the plain embedding.
Tensor overlap_patch_embed(const Tensor& img, const HierModel& m, int stride = 0, int pad = -1);

// Zero-pad bottom/right to multiples of ws and cut into non-overlapping
// windows: [C,H,W] -> [nW, ws*ws, C], windows and in-window tokens both
// row-major.
std::pair<Tensor, PadInfo> window_partition(const Tensor& x, int ws);
Tensor window_reverse(const Tensor& windows, const PadInfo& pad, int ws);

// index[i,j] = (dy+ws-1)*(2ws-1) + (dx+ws-1) where (dy,dx) is the offset
// from token i to token j; values in [0, (2ws-1)^2).
std::vector<int> rel_pos_index(int ws);

// Window-restricted multi-head attention with optional per-head relative
// position bias added to the pre-softmax logits. Padded key positions are
// masked with -inf; output is cropped back to [C,H,W].
Tensor window_attention(const Tensor& x, const BlockWeights& bw, int heads,
                        const Tensor* bias_table, int ws);

// avg_pool2d(x,3,2,1) + conv branch (or the single merged conv).
Tensor stage_downsample(const Tensor& x, const Downsampler& ds);

// Full forward. Classification heads return logits, pyramid heads the four
// tap maps (each passed through the final norm parameters).
HierOutput forward_hier(const Tensor& img, const HierModel& m);

// Raw per-stage output maps (after the stage's blocks, before the stage's
// downsampler, no norm applied).
std::vector<Tensor> forward_hier_stage_maps(const Tensor& img, const HierModel& m);

// Serialization: source keys byte-identical, new parameters under the
// `hier.` prefix, config recorded in archive metadata.
NamedTensorArchive hier_to_archive(const HierModel& m);
HierModel hier_from_archive(const NamedTensorArchive& a);

extern const char* const kHierConfigMetaKey;   // "config"
extern const char* const kHierMergedMetaKey;   // "merged"

std::string downsample_key(int stage, const std::string& suffix);
std::string bias_table_key(int block);

struct ReuseAudit {
    std::int64_t reused_tensors = 0;
    std::int64_t reused_params = 0;
    std::int64_t new_tensors = 0;
    std::int64_t new_params = 0;
    int new_convs = 0;
    int new_bias_tables = 0;
    bool all_byte_identical = false;
    std::vector<std::string> mismatched;
};

// Byte-level comparison of a surgered archive against its source.
ReuseAudit audit_reuse(const NamedTensorArchive& plain, const NamedTensorArchive& hier);

}  // namespace vitreforge
