// transformer.hpp : shared pre-LN causal transformer stack with LoRA hooks
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emomni/autodiff.hpp"

namespace emomni {

struct TransformerSpec {
    int layers = 2;
    int heads = 4;
    int d_model = 64;
    int mlp_mult = 4;
    double lora_scale = 1.0;  // applied to every attached adapter delta
};

// Decides per parameter name whether this tape treats it as trainable.
using TrainableFn = std::function<bool(const std::string&)>;

inline TrainableFn all_frozen() {
    return [](const std::string&) { return false; };
}

// Parameter names created under `prefix`:
//   <prefix>.l<i>.ln1.gain/.bias  <prefix>.l<i>.attn.wq/.wk/.wv/.wo
//   <prefix>.l<i>.ln2.gain/.bias  <prefix>.l<i>.mlp.w1/.b1/.w2/.b2
//   <prefix>.final_ln.gain/.bias
// Per-name seeds are derived from (seed, name) so init is order-independent.
void init_transformer(ParamStore& ps, const std::string& prefix, const TransformerSpec& s,
                      uint64_t seed);

// Runs the stack over node x (N x d_model) with structural causal masking.
// Any projection with a sibling `<name>.lora_down`/`<name>.lora_up` pair in
// the store gets `lora_scale * x @ down @ up` added to its output.
int transformer_nodes(Tape& t, ParamStore& ps, const std::string& prefix,
                      const TransformerSpec& s, int x, const TrainableFn& trainable);

// Creates zero-delta adapters (down ~ N(0, 0.1), up = 0) on the named
// projections; targets are a subset of {"q","k","v","o"}.
void attach_lora_params(ParamStore& ps, const std::string& prefix, const TransformerSpec& s,
                        int rank, const std::vector<std::string>& targets, uint64_t seed);

// Folds every adapter delta into its base matrix and erases the adapter.
void merge_lora_params(ParamStore& ps, const std::string& prefix, const TransformerSpec& s);

// Names of all adapter parameters currently attached under `prefix`.
std::vector<std::string> lora_param_names(const ParamStore& ps, const std::string& prefix);

}  // namespace emomni
