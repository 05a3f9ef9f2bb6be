// backbone.hpp : toy decoder-only text LM over a byte vocabulary with a
// continuous feature prefix and low-rank adaptation
#pragma once

#include <string>
#include <vector>

#include "emomni/config.hpp"
#include "emomni/transformer.hpp"

namespace emomni {

// byte-level tokenizer: three reserved ids, then raw bytes shifted by 3
constexpr int kPadId = 0;
constexpr int kBosId = 1;
constexpr int kEosId = 2;
constexpr int kByteOffset = 3;
constexpr int kTextVocab = 256 + kByteOffset;

std::vector<int> text_to_ids(const std::string& text);  // bytes only, no BOS/EOS
std::string ids_to_text(const std::vector<int>& ids);   // stops at EOS, skips PAD/BOS

struct BackboneConfig {
    TransformerSpec t;
    int vocab_size = kTextVocab;
    int max_len = 256;     // prefix + token positions combined
    int max_prefix = 64;   // continuous prefix positions
};

BackboneConfig backbone_config_from(const RunConfig& cfg);

// Creates `backbone.tok_embed` (tied input/output), `backbone.tok_pos`,
// `backbone.prefix_pos` and the transformer stack under `backbone.`.
void init_backbone(ParamStore& ps, const BackboneConfig& cfg, uint64_t seed);

struct BackboneNodes {
    int hidden;  // T_tok x d_model, token positions only (H_out)
    int logits;  // T_tok x vocab
};

// `prefix` node may be -1 for no prefix; tokens must be non-empty.
BackboneNodes backbone_forward_nodes(Tape& t, ParamStore& ps, const BackboneConfig& cfg,
                                     int prefix, const std::vector<int>& tokens,
                                     const TrainableFn& trainable);

// Pure forward: returns (hidden, logits).
std::pair<Mat, Mat> backbone_forward(ParamStore& ps, const BackboneConfig& cfg, const Mat& prefix,
                                     const std::vector<int>& tokens);

enum class GenMode { Greedy, Sampled };

// Autoregressive generation from [BOS] after `prefix`. Returns generated ids
// only (ending with EOS when it fired before max_new). max_new is clamped to
// the remaining position budget (max_len - prefix rows); a prefix that fills
// the whole context is rejected.
std::vector<int> backbone_generate(ParamStore& ps, const BackboneConfig& cfg, const Mat& prefix,
                                   int max_new, GenMode mode, uint64_t seed = 0);

// Adapter management for the backbone stack (targets from {"q","k","v","o"}).
void backbone_attach_lora(ParamStore& ps, const BackboneConfig& cfg, int rank,
                          const std::vector<std::string>& targets, uint64_t seed);
void backbone_merge_lora(ParamStore& ps, const BackboneConfig& cfg);

}  // namespace emomni
