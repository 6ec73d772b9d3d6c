#include "fan/blocks.hpp"

#include <cmath>
#include <stdexcept>

#include "fan/rng.hpp"

namespace fan {

std::string to_string(BlockKind k) {
    switch (k) {
        case BlockKind::Vit: return "vit";
        case BlockKind::FanCa: return "fan-ca";
        case BlockKind::FanEca: return "fan-eca";
    }
    throw std::logic_error("bad BlockKind");
}

BlockKind block_kind_from_string(const std::string& s) {
    if (s == "vit") return BlockKind::Vit;
    if (s == "fan-ca") return BlockKind::FanCa;
    if (s == "fan-eca") return BlockKind::FanEca;
    throw std::invalid_argument("unknown block kind: " + s);
}

void ModelConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("config error: depth must be >= 1");
    if (heads < 1 || dim % heads != 0)
        throw std::invalid_argument("config error: heads must divide dim (dim=" +
                                    std::to_string(dim) + ", heads=" + std::to_string(heads) + ")");
    if (patch < 1 || image_size % patch != 0)
        throw std::invalid_argument("config error: patch must divide image size (image=" +
                                    std::to_string(image_size) + ", patch=" + std::to_string(patch) + ")");
    if (num_classes < 2) throw std::invalid_argument("config error: need >= 2 classes");
    if (mlp_ratio < 1) throw std::invalid_argument("config error: mlp ratio must be >= 1");
}

ModelConfig named_config(const std::string& name) {
    ModelConfig c;
    c.kind = BlockKind::FanEca;
    c.patch = 16;
    c.image_size = 224;
    c.in_channels = 3;
    c.num_classes = 1000;
    if (name == "fan-t") { c.depth = 12; c.dim = 192; c.heads = 4; }
    else if (name == "fan-s") { c.depth = 12; c.dim = 384; c.heads = 8; }
    else if (name == "fan-b") { c.depth = 18; c.dim = 448; c.heads = 8; }
    else if (name == "fan-l") { c.depth = 24; c.dim = 480; c.heads = 10; }
    else throw std::invalid_argument("unknown model name: " + name);
    return c;
}

// ---- builders ----

Tape::Id build_self_attention(Tape& t, Tape::Id x, const SAIds& p, AnalysisProbe* probe) {
    const Tensor& xv = t.value(x);
    const size_t d = xv.rows();
    if (p.heads == 0 || d % p.heads != 0)
        throw std::invalid_argument("config error: heads must divide dim in self_attention");
    const size_t dh = d / p.heads;

    Tape::Id k = t.matmul(p.wk, x);
    Tape::Id q = t.matmul(p.wq, x);
    Tape::Id v = t.matmul(p.wv, x);

    std::vector<Tape::Id> head_outs;
    std::vector<Tape::Id> head_attn;
    for (size_t h = 0; h < p.heads; ++h) {
        Tape::Id qh = t.slice_rows(q, h * dh, (h + 1) * dh);
        Tape::Id kh = t.slice_rows(k, h * dh, (h + 1) * dh);
        Tape::Id vh = t.slice_rows(v, h * dh, (h + 1) * dh);
        // scores: n x n, scaled by the per-head dim
        Tape::Id s = t.scale(t.matmul(t.transpose(qh), kh), 1.0 / std::sqrt((double)dh));
        Tape::Id a = t.softmax(s, 1);
        head_attn.push_back(a);
        // Z_h = V_h A^T (dh x n)
        head_outs.push_back(t.matmul(vh, t.transpose(a)));
    }
    Tape::Id cat = (head_outs.size() == 1) ? head_outs[0] : t.concat_rows(head_outs);
    if (probe) {
        if (head_attn.size() == 1) {
            probe->sa_attention.push_back(t.value(head_attn[0]));
        } else {
            // stack head attentions row-wise for inspection
            size_t n = t.value(head_attn[0]).cols();
            Tensor stacked({head_attn.size() * n, n});
            size_t off = 0;
            for (Tape::Id a : head_attn) {
                const Tensor& av = t.value(a);
                for (size_t i = 0; i < av.rows(); ++i)
                    for (size_t j = 0; j < av.cols(); ++j) stacked.at(off + i, j) = av.at(i, j);
                off += av.rows();
            }
            probe->sa_attention.push_back(std::move(stacked));
        }
    }
    // Z^T = A V^T W_L  =>  Z = W_L^T (V A^T)
    return t.matmul(t.transpose(p.wl), cat);
}

Tape::Id build_mlp(Tape& t, Tape::Id z, const MLPIds& p) {
    Tape::Id h = t.gelu(t.add_col_bias(t.matmul(p.w1, z), p.b1));
    return t.add_col_bias(t.matmul(p.w2, h), p.b2);
}

Tape::Id build_channel_attention(Tape& t, Tape::Id z, Tape::Id wq, Tape::Id wk,
                                 const MLPIds& mlp, AnalysisProbe* probe) {
    const size_t n = t.value(z).cols();
    Tape::Id qz = t.matmul(wq, z);
    Tape::Id kz = t.matmul(wk, z);
    Tape::Id s = t.scale(t.matmul(qz, t.transpose(kz)), 1.0 / std::sqrt((double)n));
    Tape::Id a = t.softmax(s, 1); // d x d, rows sum to 1
    if (probe) probe->ca_attention.push_back(t.value(a));
    return t.matmul(a, build_mlp(t, z, mlp));
}

Tape::Id build_eca(Tape& t, Tape::Id z, Tape::Id wq, const MLPIds& mlp, AnalysisProbe* probe) {
    const size_t n = t.value(z).cols();
    // softmax along the token axis, both for the tokens and the prototype
    Tape::Id zn = t.softmax(z, 1);               // d x n
    Tape::Id proto = t.softmax(t.mean_rows(z), 1); // 1 x n
    Tape::Id corr = t.scale(t.matmul(t.matmul(wq, zn), t.transpose(proto)),
                            1.0 / std::sqrt((double)n)); // d x 1
    Tape::Id gate = t.sigmoid(corr);
    if (probe) probe->eca_gate.push_back(t.value(gate));
    return t.mul_col_gate(build_mlp(t, z, mlp), gate);
}

// ---- functional wrappers ----

namespace {

MLPIds leaf_mlp(Tape& t, const MLPParams& p) {
    return {t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w2), t.leaf(p.b2)};
}

} // namespace

Tensor self_attention(const Tensor& x, const SAParams& p, Tensor* attention) {
    Tape t;
    SAIds ids{t.leaf(p.wq), t.leaf(p.wk), t.leaf(p.wv), t.leaf(p.wl), p.heads};
    AnalysisProbe probe;
    Tape::Id out = build_self_attention(t, t.leaf(x), ids, attention ? &probe : nullptr);
    if (attention) *attention = probe.sa_attention.at(0);
    return t.value(out);
}

Tensor mlp_forward(const Tensor& z, const MLPParams& p) {
    Tape t;
    return t.value(build_mlp(t, t.leaf(z), leaf_mlp(t, p)));
}

Tensor channel_attention(const Tensor& z, const CAParams& p, Tensor* attention) {
    Tape t;
    AnalysisProbe probe;
    Tape::Id out = build_channel_attention(t, t.leaf(z), t.leaf(p.wq), t.leaf(p.wk),
                                           leaf_mlp(t, p.mlp), attention ? &probe : nullptr);
    if (attention) *attention = probe.ca_attention.at(0);
    return t.value(out);
}

Tensor efficient_channel_attention(const Tensor& z, const ECAParams& p, Tensor* gate) {
    Tape t;
    AnalysisProbe probe;
    Tape::Id out = build_eca(t, t.leaf(z), t.leaf(p.wq), leaf_mlp(t, p.mlp),
                             gate ? &probe : nullptr);
    if (gate) *gate = probe.eca_gate.at(0);
    return t.value(out);
}

// ---- patch embedding ----

static Tensor patch_matrix(const Tensor& image, size_t patch) {
    if (image.rank() != 3)
        throw std::invalid_argument("patch_embed expects C x H x W image");
    const size_t C = image.shape()[0], H = image.shape()[1], W = image.shape()[2];
    if (H % patch != 0 || W % patch != 0)
        throw std::invalid_argument("config error: patch size " + std::to_string(patch) +
                                    " does not divide image " + std::to_string(H) + "x" + std::to_string(W));
    const size_t gh = H / patch, gw = W / patch;
    const size_t n = gh * gw;
    const size_t flat = C * patch * patch;
    Tensor P({flat, n});
    for (size_t gy = 0; gy < gh; ++gy)
        for (size_t gx = 0; gx < gw; ++gx) {
            const size_t tok = gy * gw + gx;
            size_t r = 0;
            for (size_t c = 0; c < C; ++c)
                for (size_t py = 0; py < patch; ++py)
                    for (size_t px = 0; px < patch; ++px)
                        P.at(r++, tok) = image.at3(c, gy * patch + py, gx * patch + px);
        }
    return P;
}

Tensor patch_embed(const Tensor& image, const EmbedParams& p, size_t patch) {
    Tensor P = patch_matrix(image, patch);
    Tensor tokens = matmul(p.w, P);
    for (size_t i = 0; i < tokens.rows(); ++i)
        for (size_t j = 0; j < tokens.cols(); ++j)
            tokens.at(i, j) += p.b[i] + p.pos.at(i, j);
    return tokens;
}

// ---- model ----

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const size_t d = cfg_.dim;
    const size_t n = cfg_.tokens();
    const size_t rd = cfg_.mlp_ratio * d;
    const size_t flat = cfg_.in_channels * cfg_.patch * cfg_.patch;

    auto reg = [&](const std::string& name, std::vector<size_t> shape) {
        names_.push_back(name);
        shapes_.push_back(std::move(shape));
    };

    reg("embed.w", {d, flat});
    reg("embed.b", {d});
    reg("embed.pos", {d, n});
    for (size_t b = 0; b < cfg_.depth; ++b) {
        std::string pre = "block" + std::to_string(b) + ".";
        reg(pre + "ln1.gamma", {d});
        reg(pre + "ln1.beta", {d});
        reg(pre + "sa.wq", {d, d});
        reg(pre + "sa.wk", {d, d});
        reg(pre + "sa.wv", {d, d});
        reg(pre + "sa.wl", {d, d});
        reg(pre + "ln2.gamma", {d});
        reg(pre + "ln2.beta", {d});
        if (cfg_.kind == BlockKind::FanCa) {
            reg(pre + "ca.wq", {d, d});
            reg(pre + "ca.wk", {d, d});
        } else if (cfg_.kind == BlockKind::FanEca) {
            reg(pre + "eca.wq", {d, d});
        }
        reg(pre + "mlp.w1", {rd, d});
        reg(pre + "mlp.b1", {rd});
        reg(pre + "mlp.w2", {d, rd});
        reg(pre + "mlp.b2", {d});
    }
    reg("final.ln.gamma", {d});
    reg("final.ln.beta", {d});
    reg("head.w", {cfg_.num_classes, d});
    reg("head.b", {cfg_.num_classes});
}

std::vector<Tensor> Model::init_params(uint64_t seed) const {
    std::vector<Tensor> out;
    out.reserve(names_.size());
    for (size_t i = 0; i < names_.size(); ++i) {
        Tensor t(shapes_[i]);
        const std::string& name = names_[i];
        bool is_gamma = name.size() >= 5 && name.rfind("gamma") == name.size() - 5;
        bool is_bias = name.rfind(".b") != std::string::npos &&
                       (name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2"));
        bool is_beta = name.ends_with("beta");
        if (is_gamma) {
            for (size_t e = 0; e < t.size(); ++e) t[e] = 1.0;
        } else if (is_bias || is_beta) {
            // zeros
        } else {
            Rng rng(derive_seed(seed, name));
            for (size_t e = 0; e < t.size(); ++e) t[e] = rng.trunc_normal(0.02);
        }
        out.push_back(std::move(t));
    }
    return out;
}

Tape::Id Model::build(Tape& t, const std::vector<Tape::Id>& params, const Tensor& image,
                      AnalysisProbe* probe) const {
    if (params.size() != names_.size())
        throw std::invalid_argument("parameter count mismatch");
    size_t i = 0;
    auto next = [&]() { return params[i++]; };

    Tape::Id embed_w = next();
    Tape::Id embed_b = next();
    Tape::Id pos = next();

    Tensor P = patch_matrix(image, cfg_.patch);
    Tape::Id patches = t.leaf(std::move(P));
    Tape::Id x = t.add(t.add_col_bias(t.matmul(embed_w, patches), embed_b), pos);
    if (probe) probe->tokens_after_embed = t.value(x);

    for (size_t b = 0; b < cfg_.depth; ++b) {
        Tape::Id ln1_g = next(), ln1_b = next();
        SAIds sa{next(), next(), next(), next(), cfg_.heads};
        Tape::Id ln2_g = next(), ln2_b = next();
        Tape::Id ca_wq = -1, ca_wk = -1, eca_wq = -1;
        if (cfg_.kind == BlockKind::FanCa) { ca_wq = next(); ca_wk = next(); }
        else if (cfg_.kind == BlockKind::FanEca) { eca_wq = next(); }
        MLPIds mlp{next(), next(), next(), next()};

        // pre-norm residual: X + SA(LN(X))
        Tape::Id z = t.add(x, build_self_attention(t, t.layer_norm(x, ln1_g, ln1_b, 0), sa, probe));
        Tape::Id zn = t.layer_norm(z, ln2_g, ln2_b, 0);
        Tape::Id mixed = -1;
        switch (cfg_.kind) {
            case BlockKind::Vit: mixed = build_mlp(t, zn, mlp); break;
            case BlockKind::FanCa: mixed = build_channel_attention(t, zn, ca_wq, ca_wk, mlp, probe); break;
            case BlockKind::FanEca: mixed = build_eca(t, zn, eca_wq, mlp, probe); break;
        }
        x = t.add(z, mixed);
        if (probe) probe->block_outputs.push_back(t.value(x));
    }

    Tape::Id fin_g = next(), fin_b = next();
    Tape::Id head_w = next(), head_b = next();
    Tape::Id pooled = t.mean_cols(t.layer_norm(x, fin_g, fin_b, 0)); // d x 1
    return t.add_col_bias(t.matmul(head_w, pooled), head_b);
}

Tensor Model::forward(const std::vector<Tensor>& params, const Tensor& image,
                      AnalysisProbe* probe) const {
    Tape t;
    std::vector<Tape::Id> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(t.leaf(p));
    return t.value(build(t, ids, image, probe));
}

size_t Model::predict(const std::vector<Tensor>& params, const Tensor& image) const {
    Tensor logits = forward(params, image);
    size_t best = 0;
    for (size_t i = 1; i < logits.rows(); ++i)
        if (logits.at(i, 0) > logits.at(best, 0)) best = i;
    return best;
}

// ---- FLOP model ----

uint64_t FlopTable::find(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r.flops;
    throw std::invalid_argument("no flop row: " + name);
}

FlopTable count_flops(const ModelConfig& cfg) {
    cfg.validate();
    const uint64_t d = cfg.dim, n = cfg.tokens(), r = cfg.mlp_ratio;
    const uint64_t flat = cfg.in_channels * cfg.patch * cfg.patch;
    FlopTable tbl;
    auto row = [&](const std::string& name, uint64_t f) {
        tbl.rows.push_back({name, f});
        tbl.total += f;
    };
    row("patch_embed", d * flat * n);
    row("sa.qkv_proj", cfg.depth * 3 * d * d * n);
    row("sa.attention", cfg.depth * 2 * n * n * d);
    row("sa.out_proj", cfg.depth * d * d * n);
    row("mlp", cfg.depth * 2 * r * d * d * n);
    if (cfg.kind == BlockKind::FanCa) {
        row("ca.proj", cfg.depth * 2 * d * d * n);
        // d x d attention formed from d x n features, then applied to MLP(Z)
        row("ca.channel_mixing", cfg.depth * 2 * d * d * n);
    } else if (cfg.kind == BlockKind::FanEca) {
        row("eca.proj", cfg.depth * d * d * n);
        // prototype correlation + per-channel reweighting, linear in d
        row("eca.gate", cfg.depth * 2 * d * n);
    }
    row("head", cfg.num_classes * d);
    return tbl;
}

} // namespace fan
