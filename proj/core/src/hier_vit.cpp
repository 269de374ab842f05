#include "vitreforge/hier_vit.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "vitreforge/errors.hpp"
#include "vitreforge/interpolate.hpp"

namespace vitreforge {

const char* const kHierConfigMetaKey = "config";
const char* const kHierMergedMetaKey = "merged";

std::string downsample_key(int stage, const std::string& suffix) {
    return "hier.downsample." + std::to_string(stage) + ".conv." + suffix;
}

std::string bias_table_key(int block) {
    return "hier.blocks." + std::to_string(block) + ".attn.rel_pos_bias";
}

// ---------------------------------------------------------------------------
// config

HierVitConfig HierVitConfig::defaults(const PlainVitSchema& s, HierHead head, int window_size) {
    HierVitConfig cfg;
    if (s.depth == 12) {
        cfg.stage_layout = {2, 2, 6, 2};
    } else if (s.depth % 4 == 0) {
        const int q = s.depth / 4;
        cfg.stage_layout = {q, q, q, q};
    } else {
        throw ConfigError("no default stage layout for depth " + std::to_string(s.depth) +
                          "; pass one explicitly");
    }
    cfg.head = head;
    cfg.final_pool = (head == HierHead::Classification) ? FinalStagePool::Gap : FinalStagePool::Learned;
    cfg.window_plan.reserve(static_cast<std::size_t>(s.depth));
    for (int stage = 0; stage < 4; ++stage) {
        for (int b = 0; b < cfg.stage_layout[static_cast<std::size_t>(stage)]; ++b) {
            cfg.window_plan.push_back(stage < 2 ? BlockAttn::win(window_size) : BlockAttn::global());
        }
    }
    return cfg;
}

void HierVitConfig::validate(const PlainVitSchema& s) const {
    int sum = 0;
    for (int n : stage_layout) {
        if (n <= 0) throw ConfigError("stage layout entries must be positive");
        sum += n;
    }
    if (sum != s.depth) {
        std::ostringstream os;
        os << "stage layout ";
        for (std::size_t i = 0; i < 4; ++i) os << (i ? "," : "") << stage_layout[i];
        os << " sums to " << sum << ", model depth is " << s.depth;
        throw ConfigError(os.str());
    }
    if (window_plan.size() != static_cast<std::size_t>(s.depth)) {
        throw ConfigError("window plan has " + std::to_string(window_plan.size()) +
                          " entries, model depth is " + std::to_string(s.depth));
    }
    for (const BlockAttn& b : window_plan) {
        if (b.kind == AttnKind::Window && b.window < 1) {
            throw ConfigError("window size must be >= 1");
        }
    }
    if (embed_stride < 1 || embed_stride > s.patch) {
        throw ConfigError("embed stride " + std::to_string(embed_stride) +
                          " must be in [1, patch=" + std::to_string(s.patch) + "]");
    }
    if ((s.patch - embed_stride) % 2 != 0) {
        throw ConfigError("patch minus embed stride must be even for symmetric padding");
    }
}

std::array<int, 4> HierVitConfig::taps() const {
    std::array<int, 4> t{};
    int acc = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        acc += stage_layout[i];
        t[i] = acc;
    }
    return t;
}

int HierVitConfig::stage_of_block(int block) const {
    int acc = 0;
    for (int s = 0; s < 4; ++s) {
        acc += stage_layout[static_cast<std::size_t>(s)];
        if (block < acc) return s;
    }
    throw ConfigError("block index " + std::to_string(block) + " outside stage layout");
}

std::string HierVitConfig::to_text() const {
    std::ostringstream os;
    os << "stage_layout=";
    for (std::size_t i = 0; i < 4; ++i) os << (i ? "," : "") << stage_layout[i];
    os << "\nwindow_plan=";
    for (std::size_t i = 0; i < window_plan.size(); ++i) {
        if (i) os << ",";
        if (window_plan[i].kind == AttnKind::Window) {
            os << "w" << window_plan[i].window;
        } else {
            os << "g";
        }
    }
    os << "\nembed_stride=" << embed_stride;
    os << "\nhead=" << (head == HierHead::Classification ? "classification" : "pyramid");
    os << "\nfinal_pool=";
    switch (final_pool) {
        case FinalStagePool::Gap: os << "gap"; break;
        case FinalStagePool::Max2: os << "max2"; break;
        case FinalStagePool::Learned: os << "learned"; break;
    }
    os << "\n";
    return os.str();
}

HierVitConfig HierVitConfig::from_text(const std::string& text) {
    HierVitConfig cfg;
    cfg.window_plan.clear();
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("bad config line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "stage_layout") {
            std::istringstream vs(val);
            std::string tok;
            std::size_t i = 0;
            while (std::getline(vs, tok, ',')) {
                if (i >= 4) throw ConfigError("stage_layout must have 4 entries");
                cfg.stage_layout[i++] = std::stoi(tok);
            }
            if (i != 4) throw ConfigError("stage_layout must have 4 entries");
        } else if (key == "window_plan") {
            std::istringstream vs(val);
            std::string tok;
            while (std::getline(vs, tok, ',')) {
                if (tok == "g") {
                    cfg.window_plan.push_back(BlockAttn::global());
                } else if (tok.size() >= 2 && tok[0] == 'w') {
                    cfg.window_plan.push_back(BlockAttn::win(std::stoi(tok.substr(1))));
                } else {
                    throw ConfigError("bad window plan token '" + tok + "'");
                }
            }
        } else if (key == "embed_stride") {
            cfg.embed_stride = std::stoi(val);
        } else if (key == "head") {
            if (val == "classification") {
                cfg.head = HierHead::Classification;
            } else if (val == "pyramid") {
                cfg.head = HierHead::Pyramid;
            } else {
                throw ConfigError("bad head '" + val + "'");
            }
        } else if (key == "final_pool") {
            if (val == "gap") {
                cfg.final_pool = FinalStagePool::Gap;
            } else if (val == "max2") {
                cfg.final_pool = FinalStagePool::Max2;
            } else if (val == "learned") {
                cfg.final_pool = FinalStagePool::Learned;
            } else {
                throw ConfigError("bad final_pool '" + val + "'");
            }
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

std::vector<BlockAttn> detection_attention_plan(int depth, int window_size) {
    if (depth % 4 != 0) {
        throw ConfigError("detection plan needs depth divisible by 4, got " + std::to_string(depth));
    }
    const int q = depth / 4;
    std::vector<BlockAttn> plan(static_cast<std::size_t>(depth), BlockAttn::win(window_size));
    // evenly placed globals at blocks q,2q,3q,4q (1-based); the first one
    // becomes a window layer, the last three stay global
    for (int k = 2; k <= 4; ++k) plan[static_cast<std::size_t>(k * q - 1)] = BlockAttn::global();
    return plan;
}

// ---------------------------------------------------------------------------
// window machinery

std::pair<Tensor, PadInfo> window_partition(const Tensor& x, int ws) {
    if (x.rank() != 3) throw ShapeError("window_partition expects [C,H,W], got " + shape_str(x.shape));
    if (ws < 1) throw ShapeError("window size must be >= 1");
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    PadInfo pad;
    pad.h = h;
    pad.w = w;
    pad.ph = (h + ws - 1) / ws * ws;
    pad.pw = (w + ws - 1) / ws * ws;
    const std::int64_t gy = pad.ph / ws, gx = pad.pw / ws;
    const std::int64_t n_win = gy * gx, win_tokens = static_cast<std::int64_t>(ws) * ws;
    Tensor windows({n_win, win_tokens, c});
    const float* px = x.data.data();
    float* pw_ = windows.data.data();
    for (std::int64_t wy = 0; wy < gy; ++wy) {
        for (std::int64_t wx = 0; wx < gx; ++wx) {
            const std::int64_t wi = wy * gx + wx;
            for (std::int64_t iy = 0; iy < ws; ++iy) {
                const std::int64_t y = wy * ws + iy;
                for (std::int64_t ix = 0; ix < ws; ++ix) {
                    const std::int64_t xx = wx * ws + ix;
                    float* dst = pw_ + ((wi * win_tokens) + iy * ws + ix) * c;
                    if (y >= h || xx >= w) {
                        std::memset(dst, 0, static_cast<std::size_t>(c) * sizeof(float));
                        continue;
                    }
                    for (std::int64_t ci = 0; ci < c; ++ci) dst[ci] = px[(ci * h + y) * w + xx];
                }
            }
        }
    }
    return {std::move(windows), pad};
}

Tensor window_reverse(const Tensor& windows, const PadInfo& pad, int ws) {
    if (windows.rank() != 3) {
        throw ShapeError("window_reverse expects [nW,ws*ws,C], got " + shape_str(windows.shape));
    }
    const std::int64_t gy = pad.ph / ws, gx = pad.pw / ws;
    const std::int64_t win_tokens = static_cast<std::int64_t>(ws) * ws;
    if (windows.dim(0) != gy * gx || windows.dim(1) != win_tokens) {
        throw ShapeError("window_reverse: windows " + shape_str(windows.shape) +
                         " inconsistent with pad info");
    }
    const std::int64_t c = windows.dim(2);
    Tensor x({c, pad.h, pad.w});
    float* px = x.data.data();
    const float* pw_ = windows.data.data();
    for (std::int64_t wy = 0; wy < gy; ++wy) {
        for (std::int64_t wx = 0; wx < gx; ++wx) {
            const std::int64_t wi = wy * gx + wx;
            for (std::int64_t iy = 0; iy < ws; ++iy) {
                const std::int64_t y = wy * ws + iy;
                if (y >= pad.h) continue;
                for (std::int64_t ix = 0; ix < ws; ++ix) {
                    const std::int64_t xx = wx * ws + ix;
                    if (xx >= pad.w) continue;
                    const float* src = pw_ + ((wi * win_tokens) + iy * ws + ix) * c;
                    for (std::int64_t ci = 0; ci < c; ++ci) px[(ci * pad.h + y) * pad.w + xx] = src[ci];
                }
            }
        }
    }
    return x;
}

std::vector<int> rel_pos_index(int ws) {
    if (ws < 1) throw ShapeError("rel_pos_index: window size must be >= 1");
    static std::mutex mu;
    static std::map<int, std::vector<int>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(ws);
    if (it != cache.end()) return it->second;

    const int n = ws * ws, span = 2 * ws - 1;
    std::vector<int> index(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const int yi = i / ws, xi = i % ws;
        for (int j = 0; j < n; ++j) {
            const int dy = j / ws - yi, dx = j % ws - xi;
            index[static_cast<std::size_t>(i) * n + j] = (dy + ws - 1) * span + (dx + ws - 1);
        }
    }
    cache[ws] = index;
    return index;
}

namespace {

Tensor take_head_rows(const float* base, std::int64_t n, std::int64_t row_stride, std::int64_t col0,
                      std::int64_t hd) {
    Tensor out({n, hd});
    for (std::int64_t i = 0; i < n; ++i) {
        std::memcpy(out.data.data() + i * hd, base + i * row_stride + col0,
                    static_cast<std::size_t>(hd) * sizeof(float));
    }
    return out;
}

}  // namespace

Tensor window_attention(const Tensor& x, const BlockWeights& bw, int heads,
                        const Tensor* bias_table, int ws) {
    if (x.rank() != 3) throw ShapeError("window_attention expects [C,H,W], got " + shape_str(x.shape));
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (c % heads != 0) {
        throw ConfigError("dim " + std::to_string(c) + " not divisible by heads " +
                          std::to_string(heads));
    }
    const int span = 2 * ws - 1;
    if (bias_table) {
        if (bias_table->rank() != 2 || bias_table->dim(0) != heads ||
            bias_table->dim(1) != static_cast<std::int64_t>(span) * span) {
            throw ConfigError("bias table shape " + shape_str(bias_table->shape) + " must be [" +
                              std::to_string(heads) + "," + std::to_string(span * span) + "] for ws " +
                              std::to_string(ws));
        }
    }
    const std::int64_t hd = c / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    const float neg_inf = -std::numeric_limits<float>::infinity();

    // qkv projection is position-wise, so it runs once over all tokens
    Tensor qkv_map = tokens_to_map(linear(map_to_tokens(x), bw.qkv_wt, &bw.qkv_b), h, w);
    auto [qkv_win, pad] = window_partition(qkv_map, ws);
    const std::int64_t n_win = qkv_win.dim(0), wt = qkv_win.dim(1);
    const bool padded = pad.ph != pad.h || pad.pw != pad.w;
    const std::vector<int> rel = rel_pos_index(ws);
    const std::int64_t gx = pad.pw / ws;

    Tensor ctx_win({n_win, wt, c});
    std::vector<char> valid(static_cast<std::size_t>(wt));
    for (std::int64_t wi = 0; wi < n_win; ++wi) {
        const float* win_base = qkv_win.data.data() + wi * wt * (3 * c);
        if (padded) {
            const std::int64_t wy = wi / gx, wx = wi % gx;
            for (std::int64_t t = 0; t < wt; ++t) {
                const std::int64_t y = wy * ws + t / ws, xx = wx * ws + t % ws;
                valid[static_cast<std::size_t>(t)] = (y < pad.h && xx < pad.w) ? 1 : 0;
            }
        }
        for (int hh = 0; hh < heads; ++hh) {
            Tensor q = take_head_rows(win_base, wt, 3 * c, 0 * c + hh * hd, hd);
            Tensor k = take_head_rows(win_base, wt, 3 * c, 1 * c + hh * hd, hd);
            Tensor v = take_head_rows(win_base, wt, 3 * c, 2 * c + hh * hd, hd);
            Tensor scores = matmul(q, transpose2d(k));
            float* ps = scores.data.data();
            for (std::int64_t i = 0; i < wt * wt; ++i) ps[i] *= scale;
            if (bias_table) {
                const float* bt = bias_table->data.data() + static_cast<std::int64_t>(hh) * span * span;
                for (std::int64_t i = 0; i < wt; ++i) {
                    float* row = ps + i * wt;
                    const int* ri = rel.data() + i * wt;
                    for (std::int64_t j = 0; j < wt; ++j) row[j] += bt[ri[j]];
                }
            }
            if (padded) {
                for (std::int64_t j = 0; j < wt; ++j) {
                    if (valid[static_cast<std::size_t>(j)]) continue;
                    for (std::int64_t i = 0; i < wt; ++i) ps[i * wt + j] = neg_inf;
                }
            }
            Tensor probs = softmax(scores, 1);
            Tensor o = matmul(probs, v);
            for (std::int64_t i = 0; i < wt; ++i) {
                std::memcpy(ctx_win.data.data() + (wi * wt + i) * c + hh * hd, o.data.data() + i * hd,
                            static_cast<std::size_t>(hd) * sizeof(float));
            }
        }
    }

    Tensor ctx_map = window_reverse(ctx_win, pad, ws);
    return tokens_to_map(linear(map_to_tokens(ctx_map), bw.proj_wt, &bw.proj_b), h, w);
}

Tensor stage_downsample(const Tensor& x, const Downsampler& ds) {
    if (ds.merged) return conv2d(x, ds.conv_w, &ds.conv_b, 2, 1);
    Tensor pooled = avg_pool2d(x, 3, 2, 1);
    Tensor conved = conv2d(x, ds.conv_w, &ds.conv_b, 2, 1);
    add_inplace(pooled, conved);
    return pooled;
}

// ---------------------------------------------------------------------------
// surgery and forward

Tensor HierModel::pos_map_for(std::int64_t h, std::int64_t w) const {
    const std::int64_t g = schema.grid(), d = schema.dim;
    const std::int64_t slot = schema.pos_has_cls_slot ? 1 : 0;
    Tensor spatial({g, g, d});
    std::memcpy(spatial.data.data(), pos_src.data.data() + slot * d,
                static_cast<std::size_t>(g * g * d) * sizeof(float));
    Tensor grid_hw = bicubic_resize_grid(spatial, h, w);  // [h,w,d]
    return tokens_to_map(grid_hw.reshaped({h * w, d}), h, w);
}

int HierModel::n_window_blocks() const {
    int n = 0;
    for (const BlockAttn& b : cfg.window_plan) n += b.kind == AttnKind::Window ? 1 : 0;
    return n;
}

HierModel surgery(const NamedTensorArchive& plain, const HierVitConfig& cfg) {
    HierModel m;
    m.schema = validate_plain_vit(plain);
    cfg.validate(m.schema);
    m.cfg = cfg;

    m.patch_w = plain.get("patch_embed.proj.weight");
    m.patch_b = plain.get("patch_embed.proj.bias");
    m.pos_src = plain.get("pos_embed").reshaped({plain.get("pos_embed").dim(1), m.schema.dim});
    m.norm_w = plain.get("norm.weight");
    m.norm_b = plain.get("norm.bias");
    if (m.schema.has_cls_token) {
        m.has_cls = true;
        m.cls_src = plain.get("cls_token").reshaped({m.schema.dim});
    }
    if (cfg.head == HierHead::Classification && m.schema.n_classes > 0) {
        m.has_head = true;
        m.head_w = plain.get("head.weight");
        m.head_b = plain.get("head.bias");
    }
    m.blocks.reserve(static_cast<std::size_t>(m.schema.depth));
    for (int b = 0; b < m.schema.depth; ++b) {
        m.blocks.push_back(block_weights_from_archive(plain, b));
    }

    // interpolated position grid for the native resolution
    const std::int64_t g4 = static_cast<std::int64_t>(m.schema.img) / cfg.embed_stride;
    m.pos_grid = m.pos_map_for(g4, g4);

    const std::int64_t d = m.schema.dim;
    const int n_ds = 3 + (cfg.final_pool == FinalStagePool::Learned ? 1 : 0);
    for (int s = 0; s < n_ds; ++s) {
        Downsampler ds;
        ds.conv_w = Tensor::zeros({d, d, 3, 3});
        ds.conv_b = Tensor::zeros({d});
        m.downsamplers.push_back(std::move(ds));
    }

    m.bias_tables.resize(static_cast<std::size_t>(m.schema.depth));
    for (int b = 0; b < m.schema.depth; ++b) {
        const BlockAttn& plan = cfg.window_plan[static_cast<std::size_t>(b)];
        if (plan.kind == AttnKind::Window) {
            const std::int64_t span = 2 * plan.window - 1;
            m.bias_tables[static_cast<std::size_t>(b)] = Tensor::zeros({m.schema.heads, span * span});
        }
    }
    return m;
}

Tensor overlap_patch_embed(const Tensor& img, const HierModel& m, int stride, int pad) {
    if (img.rank() != 3 || img.dim(0) != 3) {
        throw ShapeError("overlap_patch_embed expects [3,H,W], got " + shape_str(img.shape));
    }
    const int s = stride > 0 ? stride : m.cfg.embed_stride;
    const int p = pad >= 0 ? pad : (m.schema.patch - s) / 2;
    if (img.dim(1) % s != 0 || img.dim(2) % s != 0) {
        throw ShapeError("input " + shape_str(img.shape) + " not divisible by embed stride " +
                         std::to_string(s));
    }
    return conv2d(img, m.patch_w, &m.patch_b, s, p);
}

namespace {

Tensor hier_block(const Tensor& x_map, const BlockWeights& bw, const BlockAttn& plan,
                  const Tensor* bias_table, int heads, float eps) {
    const std::int64_t h = x_map.dim(1), w = x_map.dim(2);
    Tensor tokens = map_to_tokens(x_map);
    Tensor normed = layer_norm(tokens, bw.norm1_w, bw.norm1_b, eps);
    Tensor attn_out;
    if (plan.kind == AttnKind::Window) {
        Tensor am = window_attention(tokens_to_map(normed, h, w), bw, heads, bias_table, plan.window);
        attn_out = map_to_tokens(am);
    } else {
        attn_out = global_attention(normed, bw, heads);
    }
    add_inplace(tokens, attn_out);
    Tensor h2 = layer_norm(tokens, bw.norm2_w, bw.norm2_b, eps);
    Tensor mlp = linear(gelu(linear(h2, bw.fc1_wt, &bw.fc1_b)), bw.fc2_wt, &bw.fc2_b);
    add_inplace(tokens, mlp);
    return tokens_to_map(tokens, h, w);
}

Tensor apply_final_norm_to_map(const Tensor& map, const HierModel& m) {
    const std::int64_t h = map.dim(1), w = map.dim(2);
    Tensor tokens = layer_norm(map_to_tokens(map), m.norm_w, m.norm_b, m.schema.norm_eps);
    return tokens_to_map(tokens, h, w);
}

}  // namespace

std::vector<Tensor> forward_hier_stage_maps(const Tensor& img, const HierModel& m) {
    if (img.rank() != 3 || img.dim(0) != 3) {
        throw ShapeError("forward_hier expects [3,H,W], got " + shape_str(img.shape));
    }
    if (img.dim(1) % 32 != 0 || img.dim(2) % 32 != 0) {
        throw ShapeError("input " + shape_str(img.shape) +
                         " must have spatial dims divisible by 32");
    }
    Tensor x = overlap_patch_embed(img, m);
    const std::int64_t gh = x.dim(1), gw = x.dim(2);
    if (gh == m.pos_grid.dim(1) && gw == m.pos_grid.dim(2)) {
        add_inplace(x, m.pos_grid);
    } else {
        add_inplace(x, m.pos_map_for(gh, gw));
    }

    std::vector<Tensor> stage_maps;
    stage_maps.reserve(4);
    int block = 0;
    for (int stage = 0; stage < 4; ++stage) {
        for (int b = 0; b < m.cfg.stage_layout[static_cast<std::size_t>(stage)]; ++b, ++block) {
            const BlockAttn& plan = m.cfg.window_plan[static_cast<std::size_t>(block)];
            const Tensor* bias = nullptr;
            if (plan.kind == AttnKind::Window) bias = &m.bias_tables[static_cast<std::size_t>(block)];
            x = hier_block(x, m.blocks[static_cast<std::size_t>(block)], plan, bias, m.schema.heads,
                           m.schema.norm_eps);
        }
        stage_maps.push_back(x);
        if (stage < 3) x = stage_downsample(x, m.downsamplers[static_cast<std::size_t>(stage)]);
    }
    return stage_maps;
}

HierOutput forward_hier(const Tensor& img, const HierModel& m) {
    std::vector<Tensor> stages = forward_hier_stage_maps(img, m);
    HierOutput out;
    if (m.cfg.head == HierHead::Pyramid) {
        FeaturePyramid p;
        p.c4 = apply_final_norm_to_map(stages[0], m);
        p.c8 = apply_final_norm_to_map(stages[1], m);
        p.c16 = apply_final_norm_to_map(stages[2], m);
        p.c32 = apply_final_norm_to_map(stages[3], m);
        out.pyramid = std::move(p);
        return out;
    }
    if (!m.has_head) {
        throw ConfigError("classification head requested but the model has no classifier weights");
    }
    Tensor final_map = apply_final_norm_to_map(stages[3], m);
    Tensor pooled = global_avg_pool(final_map).reshaped({1, m.schema.dim});
    Tensor logits = linear(pooled, transpose2d(m.head_w), &m.head_b);
    out.logits = logits.reshaped({m.schema.n_classes});
    return out;
}

// ---------------------------------------------------------------------------
// serialization + audit

NamedTensorArchive hier_to_archive(const HierModel& m) {
    NamedTensorArchive a;
    a.put("patch_embed.proj.weight", m.patch_w);
    a.put("patch_embed.proj.bias", m.patch_b);
    a.put("pos_embed", m.pos_src.reshaped({1, m.pos_src.dim(0), m.schema.dim}));
    if (m.has_cls) a.put("cls_token", m.cls_src.reshaped({1, 1, m.schema.dim}));
    for (int b = 0; b < m.schema.depth; ++b) {
        const BlockWeights& bw = m.blocks[static_cast<std::size_t>(b)];
        a.put(block_key(b, "norm1.weight"), bw.norm1_w);
        a.put(block_key(b, "norm1.bias"), bw.norm1_b);
        a.put(block_key(b, "attn.qkv.weight"), bw.qkv_w);
        a.put(block_key(b, "attn.qkv.bias"), bw.qkv_b);
        a.put(block_key(b, "attn.proj.weight"), bw.proj_w);
        a.put(block_key(b, "attn.proj.bias"), bw.proj_b);
        a.put(block_key(b, "norm2.weight"), bw.norm2_w);
        a.put(block_key(b, "norm2.bias"), bw.norm2_b);
        a.put(block_key(b, "mlp.fc1.weight"), bw.fc1_w);
        a.put(block_key(b, "mlp.fc1.bias"), bw.fc1_b);
        a.put(block_key(b, "mlp.fc2.weight"), bw.fc2_w);
        a.put(block_key(b, "mlp.fc2.bias"), bw.fc2_b);
    }
    a.put("norm.weight", m.norm_w);
    a.put("norm.bias", m.norm_b);
    if (m.has_head) {
        a.put("head.weight", m.head_w);
        a.put("head.bias", m.head_b);
    }
    bool any_merged = false;
    for (std::size_t s = 0; s < m.downsamplers.size(); ++s) {
        a.put(downsample_key(static_cast<int>(s), "weight"), m.downsamplers[s].conv_w);
        a.put(downsample_key(static_cast<int>(s), "bias"), m.downsamplers[s].conv_b);
        any_merged = any_merged || m.downsamplers[s].merged;
    }
    for (int b = 0; b < m.schema.depth; ++b) {
        const Tensor& bt = m.bias_tables[static_cast<std::size_t>(b)];
        if (bt.numel() > 0) a.put(bias_table_key(b), bt);
    }
    a.set_meta(kHierConfigMetaKey, m.cfg.to_text());
    a.set_meta("heads", std::to_string(m.schema.heads));
    if (any_merged) a.set_meta(kHierMergedMetaKey, "true");
    return a;
}

HierModel hier_from_archive(const NamedTensorArchive& a) {
    const auto cfg_text = a.meta(kHierConfigMetaKey);
    if (!cfg_text) {
        throw SchemaError("archive has no '" + std::string(kHierConfigMetaKey) +
                          "' metadata; not a surgered model");
    }
    HierVitConfig cfg = HierVitConfig::from_text(*cfg_text);

    NamedTensorArchive plain;
    for (const auto& key : a.keys()) {
        if (key.rfind("hier.", 0) == 0) continue;
        plain.put(key, a.get(key));
    }
    if (auto h = a.meta("heads")) plain.set_meta("heads", *h);
    if (auto e = a.meta("norm_eps")) plain.set_meta("norm_eps", *e);

    HierModel m = surgery(plain, cfg);
    const bool merged = a.meta(kHierMergedMetaKey).value_or("") == "true";
    for (std::size_t s = 0; s < m.downsamplers.size(); ++s) {
        m.downsamplers[s].conv_w = a.get(downsample_key(static_cast<int>(s), "weight"));
        m.downsamplers[s].conv_b = a.get(downsample_key(static_cast<int>(s), "bias"));
        m.downsamplers[s].merged = merged;
    }
    for (int b = 0; b < m.schema.depth; ++b) {
        Tensor& bt = m.bias_tables[static_cast<std::size_t>(b)];
        if (bt.numel() > 0) {
            const Tensor& stored = a.get(bias_table_key(b));
            if (!stored.same_shape(bt)) {
                throw SchemaError("bias table " + bias_table_key(b) + " has shape " +
                                  shape_str(stored.shape) + ", expected " + shape_str(bt.shape));
            }
            bt = stored;
        }
    }
    return m;
}

ReuseAudit audit_reuse(const NamedTensorArchive& plain, const NamedTensorArchive& hier) {
    ReuseAudit r;
    r.all_byte_identical = true;
    for (const auto& key : plain.keys()) {
        const bool is_head = key.rfind("head.", 0) == 0;
        if (!hier.has(key)) {
            if (is_head) continue;  // classifier only rides along for classification heads
            r.all_byte_identical = false;
            r.mismatched.push_back(key + " (missing)");
            continue;
        }
        const Tensor& p = plain.get(key);
        const Tensor& h = hier.get(key);
        const bool same = p.shape == h.shape &&
                          std::memcmp(p.data.data(), h.data.data(), p.data.size() * 4) == 0;
        if (!same) {
            r.all_byte_identical = false;
            r.mismatched.push_back(key);
            continue;
        }
        r.reused_tensors += 1;
        r.reused_params += p.numel();
    }
    for (const auto& key : hier.keys()) {
        if (plain.has(key)) continue;
        if (key.rfind("hier.", 0) != 0) {
            r.all_byte_identical = false;
            r.mismatched.push_back(key + " (unexpected new key)");
            continue;
        }
        r.new_tensors += 1;
        r.new_params += hier.get(key).numel();
        if (key.rfind("hier.downsample.", 0) == 0 && key.size() >= 6 &&
            key.compare(key.size() - 6, 6, "weight") == 0) {
            r.new_convs += 1;
        }
        if (key.size() >= 12 && key.compare(key.size() - 12, 12, "rel_pos_bias") == 0) {
            r.new_bias_tables += 1;
        }
    }
    return r;
}

}  // namespace vitreforge
