#include "emomni/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emomni {

std::vector<int> text_to_ids(const std::string& text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(kByteOffset + int(c));
    return ids;
}

std::string ids_to_text(const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id == kEosId) break;
        if (id < kByteOffset) continue;  // PAD/BOS
        if (id >= kTextVocab) throw std::out_of_range("ids_to_text: id " + std::to_string(id));
        out.push_back(char(id - kByteOffset));
    }
    return out;
}

BackboneConfig backbone_config_from(const RunConfig& cfg) {
    BackboneConfig b;
    b.t.layers = cfg.get_int("backbone.layers");
    b.t.heads = cfg.get_int("backbone.heads");
    b.t.d_model = cfg.get_int("dims.d_model");
    b.t.mlp_mult = cfg.get_int("backbone.mlp_mult");
    b.t.lora_scale = cfg.get_double("lora.scale");
    b.max_len = cfg.get_int("backbone.max_len");
    b.max_prefix = cfg.get_int("backbone.max_prefix");
    return b;
}

void init_backbone(ParamStore& ps, const BackboneConfig& cfg, uint64_t seed) {
    if (cfg.vocab_size < 4) throw std::invalid_argument("backbone: vocab_size must be >= 4");
    init_transformer(ps, "backbone", cfg.t, seed);
    const int d = cfg.t.d_model;
    ps.set("backbone.tok_embed", mat_randn(cfg.vocab_size, d, 0.08, seed ^ fnv1a("backbone.tok_embed")));
    ps.set("backbone.tok_pos", mat_randn(cfg.max_len, d, 0.02, seed ^ fnv1a("backbone.tok_pos")));
    ps.set("backbone.prefix_pos",
           mat_randn(cfg.max_prefix, d, 0.02, seed ^ fnv1a("backbone.prefix_pos")));
}

BackboneNodes backbone_forward_nodes(Tape& t, ParamStore& ps, const BackboneConfig& cfg,
                                     int prefix, const std::vector<int>& tokens,
                                     const TrainableFn& trainable) {
    if (tokens.empty()) throw std::invalid_argument("backbone: token sequence must be non-empty");
    for (int id : tokens)
        if (id < 0 || id >= cfg.vocab_size)
            throw std::out_of_range("backbone: token id " + std::to_string(id) + " out of range");
    const int P = prefix < 0 ? 0 : t.val(prefix).rows;
    const int T = int(tokens.size());
    if (P > cfg.max_prefix)
        throw std::invalid_argument("backbone: prefix length " + std::to_string(P) +
                                    " exceeds max_prefix " + std::to_string(cfg.max_prefix));
    if (P + T > cfg.max_len)
        throw std::invalid_argument("backbone: total length " + std::to_string(P + T) +
                                    " exceeds max_len " + std::to_string(cfg.max_len));
    if (P > 0 && t.val(prefix).cols != cfg.t.d_model)
        throw std::invalid_argument("backbone: prefix dim != d_model");

    int embed_table = t.param(ps, "backbone.tok_embed", trainable("backbone.tok_embed"));
    int tok_pos = t.param(ps, "backbone.tok_pos", trainable("backbone.tok_pos"));
    int emb = t.add(t.embed(embed_table, tokens), t.slice_rows(tok_pos, 0, T));

    int x = emb;
    if (P > 0) {
        int ppos = t.param(ps, "backbone.prefix_pos", trainable("backbone.prefix_pos"));
        int pre = t.add(prefix, t.slice_rows(ppos, 0, P));
        x = t.concat_rows(pre, emb);
    }
    int h_all = transformer_nodes(t, ps, "backbone", cfg.t, x, trainable);
    BackboneNodes out;
    out.hidden = t.slice_rows(h_all, P, P + T);
    out.logits = t.matmul_nt(out.hidden, embed_table);  // tied softmax weights
    return out;
}

std::pair<Mat, Mat> backbone_forward(ParamStore& ps, const BackboneConfig& cfg, const Mat& prefix,
                                     const std::vector<int>& tokens) {
    Tape t;
    int pnode = prefix.rows > 0 ? t.leaf(prefix) : -1;
    BackboneNodes n = backbone_forward_nodes(t, ps, cfg, pnode, tokens, all_frozen());
    return {t.val(n.hidden), t.val(n.logits)};
}

namespace {

int pick_token(const Mat& logits_row, GenMode mode, Rng& rng) {
    const int vocab = logits_row.cols;
    if (mode == GenMode::Greedy) {
        int best = 0;
        for (int j = 1; j < vocab; ++j)
            if (logits_row.at(0, j) > logits_row.at(0, best)) best = j;
        return best;
    }
    // sampled: softmax CDF walk with a 53-bit uniform
    double mx = logits_row.at(0, 0);
    for (int j = 1; j < vocab; ++j) mx = std::max(mx, logits_row.at(0, j));
    double z = 0.0;
    for (int j = 0; j < vocab; ++j) z += std::exp(logits_row.at(0, j) - mx);
    double u = rng.uniform() * z;
    double acc = 0.0;
    for (int j = 0; j < vocab; ++j) {
        acc += std::exp(logits_row.at(0, j) - mx);
        if (u < acc) return j;
    }
    return vocab - 1;
}

}  // namespace

std::vector<int> backbone_generate(ParamStore& ps, const BackboneConfig& cfg, const Mat& prefix,
                                   int max_new, GenMode mode, uint64_t seed) {
    if (max_new < 1) throw std::invalid_argument("backbone: max_new must be >= 1");
    // the forward pass that emits id k sees prefix + 1 + k positions
    const int room = cfg.max_len - prefix.rows;
    if (room < 1)
        throw std::invalid_argument("backbone: prefix of " + std::to_string(prefix.rows) +
                                    " rows leaves no room to generate (max_len " +
                                    std::to_string(cfg.max_len) + ")");
    max_new = std::min(max_new, room);
    Rng rng(seed);
    std::vector<int> context = {kBosId};
    std::vector<int> out;
    while (int(out.size()) < max_new) {
        auto [hidden, logits] = backbone_forward(ps, cfg, prefix, context);
        Mat last(1, logits.cols);
        for (int j = 0; j < logits.cols; ++j) last.at(0, j) = logits.at(logits.rows - 1, j);
        const int id = pick_token(last, mode, rng);
        out.push_back(id);
        if (id == kEosId) break;
        context.push_back(id);
    }
    return out;
}

void backbone_attach_lora(ParamStore& ps, const BackboneConfig& cfg, int rank,
                          const std::vector<std::string>& targets, uint64_t seed) {
    attach_lora_params(ps, "backbone", cfg.t, rank, targets, seed);
}

void backbone_merge_lora(ParamStore& ps, const BackboneConfig& cfg) {
    merge_lora_params(ps, "backbone", cfg.t);
}

}  // namespace emomni
