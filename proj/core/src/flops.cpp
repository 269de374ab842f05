#include "vitreforge/flops.hpp"

#include "vitreforge/errors.hpp"

namespace vitreforge {

AttentionFlops global_attention_flops(std::int64_t n_tokens, std::int64_t dim) {
    AttentionFlops f;
    f.score_aggregate = 2 * n_tokens * n_tokens * dim   // q . k^T
                        + 2 * n_tokens * n_tokens * dim;  // probs . v
    f.projections = 8 * n_tokens * dim * dim;             // qkv (6) + out (2)
    return f;
}

AttentionFlops window_attention_flops(std::int64_t h, std::int64_t w, int ws, std::int64_t dim) {
    const std::int64_t n_win = ((h + ws - 1) / ws) * ((w + ws - 1) / ws);
    const std::int64_t wt = static_cast<std::int64_t>(ws) * ws;
    AttentionFlops f;
    f.score_aggregate = n_win * (2 * wt * wt * dim + 2 * wt * wt * dim);
    f.projections = 8 * h * w * dim * dim;
    return f;
}

std::int64_t conv2d_flops(std::int64_t cout, std::int64_t cin, std::int64_t kh, std::int64_t kw,
                          std::int64_t hout, std::int64_t wout) {
    return 2 * cout * cin * kh * kw * hout * wout;
}

std::int64_t mlp_flops(std::int64_t n_tokens, std::int64_t dim, std::int64_t hidden) {
    return 2 * n_tokens * dim * hidden * 2;
}

std::vector<StageCost> analyze_hier_flops(const HierModel& m, std::int64_t img_side) {
    if (img_side % 32 != 0) {
        throw ConfigError("flops analysis expects an input side divisible by 32");
    }
    const std::int64_t d = m.schema.dim;
    const std::int64_t hidden = m.schema.mlp_hidden;
    std::vector<StageCost> out;

    StageCost embed;
    embed.label = "embed";
    const std::int64_t g4 = img_side / m.cfg.embed_stride;
    embed.conv = conv2d_flops(d, 3, m.schema.patch, m.schema.patch, g4, g4);
    out.push_back(embed);

    std::int64_t side = g4;
    int block = 0;
    for (int stage = 0; stage < 4; ++stage) {
        StageCost sc;
        sc.label = "stage" + std::to_string(stage + 1);
        const std::int64_t n = side * side;
        for (int b = 0; b < m.cfg.stage_layout[static_cast<std::size_t>(stage)]; ++b, ++block) {
            const BlockAttn& plan = m.cfg.window_plan[static_cast<std::size_t>(block)];
            AttentionFlops af = plan.kind == AttnKind::Window
                                    ? window_attention_flops(side, side, plan.window, d)
                                    : global_attention_flops(n, d);
            sc.attn_score_aggregate += af.score_aggregate;
            sc.attn_projections += af.projections;
            sc.mlp += mlp_flops(n, d, hidden);
        }
        if (stage < static_cast<int>(m.downsamplers.size())) {
            const std::int64_t half = (side + 1) / 2;
            sc.conv += conv2d_flops(d, d, 3, 3, half, half);
        }
        out.push_back(sc);
        side = (side + 1) / 2;
    }
    return out;
}

}  // namespace vitreforge
