#include "vitreforge/vit_schema.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "vitreforge/errors.hpp"

namespace vitreforge {

std::string block_key(int block, const std::string& suffix) {
    return "blocks." + std::to_string(block) + "." + suffix;
}

const std::vector<std::string>& block_key_suffixes() {
    static const std::vector<std::string> suffixes = {
        "norm1.weight",      "norm1.bias",      "attn.qkv.weight", "attn.qkv.bias",
        "attn.proj.weight",  "attn.proj.bias",  "norm2.weight",    "norm2.bias",
        "mlp.fc1.weight",    "mlp.fc1.bias",    "mlp.fc2.weight",  "mlp.fc2.bias",
    };
    return suffixes;
}

namespace {

void expect_shape(const NamedTensorArchive& a, const std::string& key,
                  const std::vector<std::int64_t>& want, std::vector<std::string>& problems) {
    const Tensor& t = a.get(key);
    if (t.shape != want) {
        problems.push_back(key + ": shape " + shape_str(t.shape) + ", expected " + shape_str(want));
    }
}

int parse_block_index(const std::string& key) {
    // key starts with "blocks."
    std::size_t dot = key.find('.', 7);
    if (dot == std::string::npos) return -1;
    const std::string num = key.substr(7, dot - 7);
    if (num.empty()) return -1;
    for (char c : num) {
        if (c < '0' || c > '9') return -1;
    }
    return std::stoi(num);
}

}  // namespace

PlainVitSchema validate_plain_vit(const NamedTensorArchive& a) {
    PlainVitSchema s;
    std::vector<std::string> missing;
    std::vector<std::string> problems;

    // Embedding layer pins dim and patch size.
    if (!a.has("patch_embed.proj.weight")) {
        throw SchemaError("not a plain ViT archive: missing patch_embed.proj.weight");
    }
    const Tensor& pw = a.get("patch_embed.proj.weight");
    if (pw.rank() != 4 || pw.dim(1) != 3 || pw.dim(2) != pw.dim(3)) {
        throw SchemaError("patch_embed.proj.weight must be [dim,3,p,p], got " + shape_str(pw.shape));
    }
    s.dim = static_cast<int>(pw.dim(0));
    s.patch = static_cast<int>(pw.dim(2));
    const std::int64_t d = s.dim;

    // Depth from the block key population.
    int max_block = -1;
    std::set<std::string> known;
    known.insert("patch_embed.proj.weight");
    for (const auto& key : a.keys()) {
        if (key.rfind("blocks.", 0) == 0) {
            const int idx = parse_block_index(key);
            if (idx >= 0) max_block = std::max(max_block, idx);
        }
    }
    if (max_block < 0) throw SchemaError("not a plain ViT archive: no blocks.* keys");
    s.depth = max_block + 1;

    if (a.has("patch_embed.proj.bias")) {
        expect_shape(a, "patch_embed.proj.bias", {d}, problems);
    } else {
        missing.push_back("patch_embed.proj.bias");
    }
    known.insert("patch_embed.proj.bias");

    std::int64_t hidden = -1;
    for (int b = 0; b < s.depth; ++b) {
        for (const auto& suffix : block_key_suffixes()) known.insert(block_key(b, suffix));
        bool block_complete = true;
        for (const auto& suffix : block_key_suffixes()) {
            if (!a.has(block_key(b, suffix))) {
                missing.push_back(block_key(b, suffix));
                block_complete = false;
            }
        }
        if (!block_complete) continue;

        expect_shape(a, block_key(b, "norm1.weight"), {d}, problems);
        expect_shape(a, block_key(b, "norm1.bias"), {d}, problems);
        expect_shape(a, block_key(b, "attn.qkv.weight"), {3 * d, d}, problems);
        expect_shape(a, block_key(b, "attn.qkv.bias"), {3 * d}, problems);
        expect_shape(a, block_key(b, "attn.proj.weight"), {d, d}, problems);
        expect_shape(a, block_key(b, "attn.proj.bias"), {d}, problems);
        expect_shape(a, block_key(b, "norm2.weight"), {d}, problems);
        expect_shape(a, block_key(b, "norm2.bias"), {d}, problems);

        const Tensor& fc1 = a.get(block_key(b, "mlp.fc1.weight"));
        if (fc1.rank() != 2 || fc1.dim(1) != d) {
            problems.push_back(block_key(b, "mlp.fc1.weight") + ": shape " + shape_str(fc1.shape) +
                               ", expected [hidden," + std::to_string(d) + "]");
        } else {
            if (hidden < 0) hidden = fc1.dim(0);
            if (fc1.dim(0) != hidden) {
                problems.push_back(block_key(b, "mlp.fc1.weight") + ": hidden dim " +
                                   std::to_string(fc1.dim(0)) + " inconsistent with block 0's " +
                                   std::to_string(hidden));
            }
            expect_shape(a, block_key(b, "mlp.fc1.bias"), {hidden}, problems);
            expect_shape(a, block_key(b, "mlp.fc2.weight"), {d, hidden}, problems);
            expect_shape(a, block_key(b, "mlp.fc2.bias"), {d}, problems);
        }
    }
    if (hidden > 0) {
        s.mlp_hidden = static_cast<int>(hidden);
        s.mlp_ratio = static_cast<float>(hidden) / static_cast<float>(d);
    }

    // Position embedding fixes the native grid (with or without cls slot).
    known.insert("pos_embed");
    if (!a.has("pos_embed")) {
        missing.push_back("pos_embed");
    } else {
        const Tensor& pe = a.get("pos_embed");
        if (pe.rank() != 3 || pe.dim(0) != 1 || pe.dim(2) != d) {
            problems.push_back("pos_embed: shape " + shape_str(pe.shape) + ", expected [1,N," +
                               std::to_string(d) + "]");
        } else {
            const std::int64_t tokens = pe.dim(1);
            const auto is_square = [](std::int64_t n, std::int64_t& root) {
                root = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
                return root * root == n;
            };
            std::int64_t g = 0;
            if (is_square(tokens, g)) {
                s.pos_has_cls_slot = false;
            } else if (tokens >= 2 && is_square(tokens - 1, g)) {
                s.pos_has_cls_slot = true;
            } else {
                problems.push_back("pos_embed: token count " + std::to_string(tokens) +
                                   " is neither a square grid nor grid+1");
            }
            if (g > 0) s.img = static_cast<int>(g) * s.patch;
        }
    }

    known.insert("cls_token");
    if (a.has("cls_token")) {
        s.has_cls_token = true;
        expect_shape(a, "cls_token", {1, 1, d}, problems);
    }

    known.insert("norm.weight");
    known.insert("norm.bias");
    for (const char* k : {"norm.weight", "norm.bias"}) {
        if (!a.has(k)) {
            missing.push_back(k);
        } else {
            expect_shape(a, k, {d}, problems);
        }
    }

    known.insert("head.weight");
    known.insert("head.bias");
    const bool hw = a.has("head.weight"), hb = a.has("head.bias");
    if (hw != hb) {
        problems.push_back(std::string("classifier head incomplete: ") +
                           (hw ? "head.bias" : "head.weight") + " missing");
    } else if (hw) {
        const Tensor& headw = a.get("head.weight");
        if (headw.rank() != 2 || headw.dim(1) != d) {
            problems.push_back("head.weight: shape " + shape_str(headw.shape) + ", expected [classes," +
                               std::to_string(d) + "]");
        } else {
            s.n_classes = static_cast<int>(headw.dim(0));
            expect_shape(a, "head.bias", {headw.dim(0)}, problems);
        }
    }

    std::vector<std::string> unknown;
    for (const auto& key : a.keys()) {
        if (!known.count(key)) unknown.push_back(key);
    }

    std::ostringstream err;
    if (!missing.empty()) {
        err << "missing keys:";
        for (const auto& k : missing) err << " " << k;
        err << ". ";
    }
    if (!unknown.empty()) {
        err << "unknown keys:";
        for (const auto& k : unknown) err << " " << k;
        err << ". ";
    }
    for (const auto& p : problems) err << p << ". ";
    const std::string err_text = err.str();
    if (!err_text.empty()) throw SchemaError("plain ViT schema check failed: " + err_text);

    // Head count: metadata wins, else the 64-wide-head convention.
    if (auto h = a.meta("heads")) {
        s.heads = std::stoi(*h);
    } else if (s.dim % 64 == 0) {
        s.heads = s.dim / 64;
    } else {
        throw SchemaError("cannot infer head count for dim " + std::to_string(s.dim) +
                          "; set archive metadata 'heads'");
    }
    if (s.heads <= 0 || s.dim % s.heads != 0) {
        throw SchemaError("head count " + std::to_string(s.heads) + " does not divide dim " +
                          std::to_string(s.dim));
    }
    if (auto e = a.meta("norm_eps")) s.norm_eps = std::stof(*e);

    // Parameter-count identity: every archive element is accounted for by
    // the schema-derived closed form.
    const std::int64_t per_block =
        4 * d + (3 * d * d + 3 * d) + (d * d + d) + (static_cast<std::int64_t>(s.mlp_hidden) * d + s.mlp_hidden) +
        (d * static_cast<std::int64_t>(s.mlp_hidden) + d);
    std::int64_t expected = s.depth * per_block;
    expected += d * 3 * s.patch * s.patch + d;                       // patch embed
    expected += (s.tokens() + (s.pos_has_cls_slot ? 1 : 0)) * d;     // pos embed
    if (s.has_cls_token) expected += d;
    expected += 2 * d;                                               // final norm
    if (s.n_classes > 0) expected += static_cast<std::int64_t>(s.n_classes) * d + s.n_classes;
    if (expected != a.total_params()) {
        throw SchemaError("parameter count mismatch: archive has " +
                          std::to_string(a.total_params()) + ", schema expects " +
                          std::to_string(expected));
    }
    return s;
}

}  // namespace vitreforge
