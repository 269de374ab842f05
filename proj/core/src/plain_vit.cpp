#include "vitreforge/plain_vit.hpp"

#include <cmath>
#include <cstring>

#include "vitreforge/errors.hpp"
#include "vitreforge/interpolate.hpp"

namespace vitreforge {

void BlockWeights::prepare() {
    qkv_wt = transpose2d(qkv_w);
    proj_wt = transpose2d(proj_w);
    fc1_wt = transpose2d(fc1_w);
    fc2_wt = transpose2d(fc2_w);
}

BlockWeights block_weights_from_archive(const NamedTensorArchive& a, int block) {
    BlockWeights bw;
    bw.norm1_w = a.get(block_key(block, "norm1.weight"));
    bw.norm1_b = a.get(block_key(block, "norm1.bias"));
    bw.qkv_w = a.get(block_key(block, "attn.qkv.weight"));
    bw.qkv_b = a.get(block_key(block, "attn.qkv.bias"));
    bw.proj_w = a.get(block_key(block, "attn.proj.weight"));
    bw.proj_b = a.get(block_key(block, "attn.proj.bias"));
    bw.norm2_w = a.get(block_key(block, "norm2.weight"));
    bw.norm2_b = a.get(block_key(block, "norm2.bias"));
    bw.fc1_w = a.get(block_key(block, "mlp.fc1.weight"));
    bw.fc1_b = a.get(block_key(block, "mlp.fc1.bias"));
    bw.fc2_w = a.get(block_key(block, "mlp.fc2.weight"));
    bw.fc2_b = a.get(block_key(block, "mlp.fc2.bias"));
    bw.prepare();
    return bw;
}

PlainVitModel PlainVitModel::from_archive(const NamedTensorArchive& a) {
    PlainVitModel m;
    m.schema_ = validate_plain_vit(a);
    m.patch_w_ = a.get("patch_embed.proj.weight");
    m.patch_b_ = a.get("patch_embed.proj.bias");
    m.pos_embed_ = a.get("pos_embed").reshaped(
        {a.get("pos_embed").dim(1), m.schema_.dim});
    m.norm_w_ = a.get("norm.weight");
    m.norm_b_ = a.get("norm.bias");
    if (m.schema_.has_cls_token) {
        m.has_cls_ = true;
        m.cls_token_ = a.get("cls_token").reshaped({m.schema_.dim});
    }
    if (m.schema_.n_classes > 0) {
        m.has_head_ = true;
        m.head_w_ = a.get("head.weight");
        m.head_b_ = a.get("head.bias");
    }
    m.blocks_.reserve(static_cast<std::size_t>(m.schema_.depth));
    for (int b = 0; b < m.schema_.depth; ++b) {
        m.blocks_.push_back(block_weights_from_archive(a, b));
    }
    return m;
}

Tensor PlainVitModel::pos_for_grid(std::int64_t h, std::int64_t w) const {
    const std::int64_t g = schema_.grid();
    const std::int64_t d = schema_.dim;
    const std::int64_t slot = schema_.pos_has_cls_slot ? 1 : 0;
    Tensor spatial({g, g, d});
    std::memcpy(spatial.data.data(), pos_embed_.data.data() + slot * d,
                static_cast<std::size_t>(g * g * d) * sizeof(float));
    Tensor resized = bicubic_resize_grid(spatial, h, w);
    Tensor out({slot + h * w, d});
    if (slot) {
        std::memcpy(out.data.data(), pos_embed_.data.data(), static_cast<std::size_t>(d) * sizeof(float));
    }
    std::memcpy(out.data.data() + slot * d, resized.data.data(),
                static_cast<std::size_t>(h * w * d) * sizeof(float));
    return out;
}

Tensor patch_embed_plain(const Tensor& img, const PlainVitModel& m) {
    if (img.rank() != 3 || img.dim(0) != 3) {
        throw ShapeError("patch_embed_plain expects [3,H,W], got " + shape_str(img.shape));
    }
    const int p = m.schema().patch;
    if (img.dim(1) % p != 0 || img.dim(2) % p != 0) {
        throw ShapeError("input " + shape_str(img.shape) + " not divisible by patch size " +
                         std::to_string(p));
    }
    Tensor map = conv2d(img, m.patch_weight(), &m.patch_bias(), p, 0);
    return map_to_tokens(map);
}

namespace {

// Copy head h of section `sec` (0=q,1=k,2=v) out of packed qkv rows.
Tensor take_head(const Tensor& qkv, int sec, int head, std::int64_t dim, std::int64_t hd) {
    const std::int64_t n = qkv.dim(0);
    Tensor out({n, hd});
    const std::int64_t col0 = sec * dim + head * hd;
    for (std::int64_t i = 0; i < n; ++i) {
        std::memcpy(out.data.data() + i * hd, qkv.data.data() + i * qkv.dim(1) + col0,
                    static_cast<std::size_t>(hd) * sizeof(float));
    }
    return out;
}

}  // namespace

Tensor global_attention(const Tensor& x, const BlockWeights& bw, int heads) {
    if (x.rank() != 2) throw ShapeError("global_attention expects [N,dim], got " + shape_str(x.shape));
    const std::int64_t n = x.dim(0), dim = x.dim(1);
    if (dim % heads != 0) {
        throw ConfigError("dim " + std::to_string(dim) + " not divisible by heads " +
                          std::to_string(heads));
    }
    const std::int64_t hd = dim / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    Tensor qkv = linear(x, bw.qkv_wt, &bw.qkv_b);  // [N, 3*dim]
    Tensor ctx({n, dim});
    for (int h = 0; h < heads; ++h) {
        Tensor q = take_head(qkv, 0, h, dim, hd);
        Tensor k = take_head(qkv, 1, h, dim, hd);
        Tensor v = take_head(qkv, 2, h, dim, hd);
        Tensor scores = matmul(q, transpose2d(k));  // [N, N]
        for (float& s : scores.data) s *= scale;
        Tensor probs = softmax(scores, 1);
        Tensor o = matmul(probs, v);  // [N, hd]
        for (std::int64_t i = 0; i < n; ++i) {
            std::memcpy(ctx.data.data() + i * dim + h * hd, o.data.data() + i * hd,
                        static_cast<std::size_t>(hd) * sizeof(float));
        }
    }
    return linear(ctx, bw.proj_wt, &bw.proj_b);
}

Tensor vit_block(const Tensor& x, const BlockWeights& bw, int heads, float eps) {
    Tensor h = layer_norm(x, bw.norm1_w, bw.norm1_b, eps);
    Tensor y = add(x, global_attention(h, bw, heads));
    Tensor h2 = layer_norm(y, bw.norm2_w, bw.norm2_b, eps);
    Tensor mlp = linear(gelu(linear(h2, bw.fc1_wt, &bw.fc1_b)), bw.fc2_wt, &bw.fc2_b);
    add_inplace(y, mlp);
    return y;
}

Tensor forward_plain(const Tensor& img, const PlainVitModel& m, PlainHead head) {
    const PlainVitSchema& s = m.schema();
    Tensor tokens = patch_embed_plain(img, m);  // [N, dim]
    const std::int64_t gh = img.dim(1) / s.patch, gw = img.dim(2) / s.patch;
    const std::int64_t n = gh * gw, d = s.dim;

    const std::int64_t extra = m.has_cls_token() ? 1 : 0;
    Tensor x({n + extra, d});
    if (extra) {
        std::memcpy(x.data.data(), m.cls_token().data.data(), static_cast<std::size_t>(d) * sizeof(float));
    }
    std::memcpy(x.data.data() + extra * d, tokens.data.data(),
                static_cast<std::size_t>(n * d) * sizeof(float));

    Tensor pos = m.pos_for_grid(gh, gw);  // [(slot)+n, d]
    if (s.pos_has_cls_slot == (extra == 1)) {
        add_inplace(x, pos);
    } else if (s.pos_has_cls_slot && !extra) {
        // slot present but no cls token: skip the slot row
        for (std::int64_t i = 0; i < n * d; ++i) x.data[static_cast<std::size_t>(i)] += pos.data[static_cast<std::size_t>(d + i)];
    } else {
        // cls token but no slot: patch tokens get position, cls does not
        for (std::int64_t i = 0; i < n * d; ++i) x.data[static_cast<std::size_t>(d + i)] += pos.data[static_cast<std::size_t>(i)];
    }

    for (const BlockWeights& bw : m.blocks()) {
        x = vit_block(x, bw, s.heads, s.norm_eps);
    }
    x = layer_norm(x, m.final_norm_weight(), m.final_norm_bias(), s.norm_eps);

    if (head == PlainHead::Tokens) return x;

    if (!m.has_head()) {
        throw ConfigError("cls_logits head requested but archive has no classifier keys");
    }
    // mean over patch tokens (cls excluded), then classify
    Tensor pooled({1, d});
    const float inv = 1.0f / static_cast<float>(n);
    for (std::int64_t j = 0; j < d; ++j) {
        float sum = 0.0f;
        for (std::int64_t i = 0; i < n; ++i) sum += x.data[static_cast<std::size_t>((extra + i) * d + j)];
        pooled.data[static_cast<std::size_t>(j)] = sum * inv;
    }
    Tensor logits = linear(pooled, transpose2d(m.head_weight()), &m.head_bias());
    return logits.reshaped({m.schema().n_classes});
}

}  // namespace vitreforge
