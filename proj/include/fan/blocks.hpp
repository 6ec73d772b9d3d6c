#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fan/autograd.hpp"
#include "fan/tensor.hpp"

namespace fan {

// Token matrices are oriented channels x tokens: Z is d x n.

enum class BlockKind { Vit, FanCa, FanEca };

std::string to_string(BlockKind k);
BlockKind block_kind_from_string(const std::string& s);

struct ModelConfig {
    size_t depth = 4;
    size_t dim = 64;
    size_t heads = 4;
    size_t patch = 8;
    size_t mlp_ratio = 4;
    BlockKind kind = BlockKind::FanEca;
    size_t num_classes = 4;
    size_t image_size = 32;
    size_t in_channels = 1;

    size_t tokens() const { return (image_size / patch) * (image_size / patch); }
    void validate() const;
};

// Named FAN variants (depth / channel dim / heads per the published table).
ModelConfig named_config(const std::string& name);

struct SAParams {
    Tensor wq, wk, wv, wl; // all d x d
    size_t heads = 1;
};

struct MLPParams {
    Tensor w1; // rd x d
    Tensor b1; // rd
    Tensor w2; // d x rd
    Tensor b2; // d
};

struct CAParams {
    Tensor wq, wk; // d x d
    MLPParams mlp;
};

struct ECAParams {
    Tensor wq; // d x d
    MLPParams mlp;
};

// Analysis tap: filled during forward when supplied.
struct AnalysisProbe {
    Tensor tokens_after_embed;            // d x n
    std::vector<Tensor> block_outputs;    // d x n per block
    std::vector<Tensor> sa_attention;     // per block, heads stacked as (h*n) x n
    std::vector<Tensor> ca_attention;     // per fan-ca block, d x d
    std::vector<Tensor> eca_gate;         // per fan-eca block, d x 1
};

// ---- tape builders (single source of truth for forward + backward) ----

struct SAIds { Tape::Id wq, wk, wv, wl; size_t heads; };
struct MLPIds { Tape::Id w1, b1, w2, b2; };

Tape::Id build_self_attention(Tape& t, Tape::Id x, const SAIds& p,
                              AnalysisProbe* probe = nullptr);
Tape::Id build_mlp(Tape& t, Tape::Id z, const MLPIds& p);
Tape::Id build_channel_attention(Tape& t, Tape::Id z, Tape::Id wq, Tape::Id wk,
                                 const MLPIds& mlp, AnalysisProbe* probe = nullptr);
Tape::Id build_eca(Tape& t, Tape::Id z, Tape::Id wq, const MLPIds& mlp,
                   AnalysisProbe* probe = nullptr);

// ---- functional surface (runs the builders forward-only) ----

Tensor self_attention(const Tensor& x, const SAParams& p, Tensor* attention = nullptr);
Tensor mlp_forward(const Tensor& z, const MLPParams& p);
Tensor channel_attention(const Tensor& z, const CAParams& p, Tensor* attention = nullptr);
Tensor efficient_channel_attention(const Tensor& z, const ECAParams& p, Tensor* gate = nullptr);

struct EmbedParams {
    Tensor w;   // d x (C*p*p)
    Tensor b;   // d
    Tensor pos; // d x n
};

// Extracts p x p patches row-major, flattens channel-major, projects and
// adds the positional embedding. Result is d x n.
Tensor patch_embed(const Tensor& image, const EmbedParams& p, size_t patch);

// ---- model ----

class Model {
public:
    explicit Model(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<std::string>& param_names() const { return names_; }
    std::vector<Tensor> init_params(uint64_t seed) const;

    // full classification graph; returns the num_classes x 1 logits node
    Tape::Id build(Tape& t, const std::vector<Tape::Id>& params, const Tensor& image,
                   AnalysisProbe* probe = nullptr) const;

    Tensor forward(const std::vector<Tensor>& params, const Tensor& image,
                   AnalysisProbe* probe = nullptr) const;

    size_t predict(const std::vector<Tensor>& params, const Tensor& image) const;

private:
    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::vector<std::vector<size_t>> shapes_;
};

// ---- FLOP model (multiply counts, exact integer arithmetic) ----

struct FlopRow {
    std::string name;
    uint64_t flops = 0;
};

struct FlopTable {
    std::vector<FlopRow> rows;
    uint64_t total = 0;
    uint64_t find(const std::string& name) const;
};

FlopTable count_flops(const ModelConfig& cfg);

} // namespace fan
