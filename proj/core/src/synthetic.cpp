#include "vitreforge/synthetic.hpp"

#include "vitreforge/rng.hpp"
#include "vitreforge/vit_schema.hpp"

namespace vitreforge {

SyntheticSpec nano_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.depth = 4;
    s.dim = 8;
    s.heads = 2;
    s.patch = 4;
    s.img = 32;
    s.n_classes = 10;
    s.seed = seed;
    return s;
}

SyntheticSpec vit_b_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.seed = seed;
    return s;
}

namespace {

Tensor randn(Rng& rng, std::vector<std::int64_t> shape, float sigma) {
    Tensor t(std::move(shape));
    for (float& v : t.data) v = rng.normal(0.0f, sigma);
    return t;
}

Tensor gamma_init(Rng& rng, std::int64_t d, bool zero_weights) {
    Tensor t({d});
    for (float& v : t.data) v = zero_weights ? 1.0f : 1.0f + rng.normal(0.0f, 0.02f);
    return t;
}

}  // namespace

NamedTensorArchive make_plain_vit_archive(const SyntheticSpec& spec) {
    Rng rng(spec.seed);
    const std::int64_t d = spec.dim, p = spec.patch;
    const std::int64_t grid = spec.img / spec.patch;
    const std::int64_t hidden = 4 * d;
    const float w_sigma = spec.zero_weights ? 0.0f : 0.02f;

    NamedTensorArchive a;
    a.put("patch_embed.proj.weight", randn(rng, {d, 3, p, p}, w_sigma));
    a.put("patch_embed.proj.bias", randn(rng, {d}, w_sigma));
    const std::int64_t pos_rows = grid * grid + (spec.cls_token ? 1 : 0);
    a.put("pos_embed", randn(rng, {1, pos_rows, d}, 0.02f));
    if (spec.cls_token) a.put("cls_token", randn(rng, {1, 1, d}, 0.02f));
    for (int b = 0; b < spec.depth; ++b) {
        a.put(block_key(b, "norm1.weight"), gamma_init(rng, d, spec.zero_weights));
        a.put(block_key(b, "norm1.bias"), randn(rng, {d}, w_sigma));
        a.put(block_key(b, "attn.qkv.weight"), randn(rng, {3 * d, d}, w_sigma));
        a.put(block_key(b, "attn.qkv.bias"), randn(rng, {3 * d}, w_sigma));
        a.put(block_key(b, "attn.proj.weight"), randn(rng, {d, d}, w_sigma));
        a.put(block_key(b, "attn.proj.bias"), randn(rng, {d}, w_sigma));
        a.put(block_key(b, "norm2.weight"), gamma_init(rng, d, spec.zero_weights));
        a.put(block_key(b, "norm2.bias"), randn(rng, {d}, w_sigma));
        a.put(block_key(b, "mlp.fc1.weight"), randn(rng, {hidden, d}, w_sigma));
        a.put(block_key(b, "mlp.fc1.bias"), randn(rng, {hidden}, w_sigma));
        a.put(block_key(b, "mlp.fc2.weight"), randn(rng, {d, hidden}, w_sigma));
        a.put(block_key(b, "mlp.fc2.bias"), randn(rng, {d}, w_sigma));
    }
    a.put("norm.weight", gamma_init(rng, d, spec.zero_weights));
    a.put("norm.bias", randn(rng, {d}, w_sigma));
    if (spec.n_classes > 0) {
        a.put("head.weight", randn(rng, {spec.n_classes, d}, w_sigma));
        a.put("head.bias", randn(rng, {spec.n_classes}, w_sigma));
    }
    a.set_meta("heads", std::to_string(spec.heads));
    return a;
}

}  // namespace vitreforge
