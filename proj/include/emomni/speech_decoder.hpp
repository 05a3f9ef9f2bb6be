// speech_decoder.hpp : gate fusion, emotion-conditioned AdaLN, FSQ speech
// tokenizer, autoregressive speech-token decoder, waveform stub
#pragma once

#include "emomni/backbone.hpp"
#include "emomni/features.hpp"

namespace emomni {

// ---- gate fusion (alpha-blend of text embeddings and LLM hidden states) ----

// Creates `gate.w` (2*d_model x d_model) and `gate.b` (1 x d_model), both
// zero so training starts at an exact 50/50 blend.
void init_gate(ParamStore& ps, int d_model);

// alpha = sigmoid([h_text | h_out] @ w + b); result = alpha*h_text + (1-alpha)*h_out
int gate_fusion_nodes(Tape& t, int h_text, int h_out, int w, int b);
Mat gate_fusion(ParamStore& ps, const Mat& h_text, const Mat& h_out);

// ---- adaptive layer normalization -----------------------------------------

// Creates `adaln.gamma_map` / `adaln.beta_map` (D_e x d_model), zero so the
// module starts as plain layer normalization.
void init_adaln(ParamStore& ps, int d_e, int d_model);

// Per row i: normalize h_i (mean/population-variance with eps guard), then
// scale by 1 + e_i @ gamma_map and shift by e_i @ beta_map.
int adaln_nodes(Tape& t, int h, int e, int gamma_map, int beta_map, double eps);
Mat adaln(ParamStore& ps, const Mat& h, const Mat& e, double eps);

// ---- finite scalar quantization -------------------------------------------

struct FSQConfig {
    std::vector<int> levels = {8, 5, 5, 5};
};

FSQConfig fsq_config_from(const RunConfig& cfg);
int fsq_codebook_size(const FSQConfig& cfg);

// End-of-speech id: one past the codebook.
inline int speech_eos_id(const FSQConfig& cfg) { return fsq_codebook_size(cfg); }

// Clamps each dimension to [-1,1], snaps to its nearest of `levels[d]`
// uniformly spaced values in [-1,1], and packs the level tuple as a
// mixed-radix id (dimension 0 most significant).
int fsq_quantize(const std::vector<double>& x, const FSQConfig& cfg);
std::vector<double> fsq_dequantize(int id, const FSQConfig& cfg);

// ---- speech-token decoder ---------------------------------------------------

struct SpeechDecoderConfig {
    TransformerSpec t;
    FSQConfig fsq;
    int max_len = 512;       // prefix + speech-token positions combined
    double max_ratio = 10.0; // generation cap: ceil(max_ratio * prefix rows)
};

SpeechDecoderConfig speech_decoder_config_from(const RunConfig& cfg);

// Creates `speech_decoder.tok_embed` ((codebook+1) x d, tied output),
// `speech_decoder.tok_pos`, `speech_decoder.prefix_pos` and the stack.
void init_speech_decoder(ParamStore& ps, const SpeechDecoderConfig& cfg, uint64_t seed);

// Teacher-forced logits: `adapted` (L x d_model) is a causal prefix; returns
// len(tokens)+1 rows — the first predicts tokens[0] from the prefix, each
// later row predicts the following token. Tokens may be empty.
int decode_forward_nodes(Tape& t, ParamStore& ps, const SpeechDecoderConfig& cfg, int adapted,
                         const std::vector<int>& tokens, const TrainableFn& trainable);
Mat decode_forward(ParamStore& ps, const SpeechDecoderConfig& cfg, const Mat& adapted,
                   const std::vector<int>& tokens);

// Greedy (or seeded-sampled) autoregression; stops at end-of-speech, at
// ceil(max_ratio * L) tokens, or when the position budget (max_len) runs out,
// whichever comes first. EOS is included in the result when generated.
std::vector<int> generate_speech(ParamStore& ps, const SpeechDecoderConfig& cfg,
                                 const Mat& adapted, GenMode mode = GenMode::Greedy,
                                 uint64_t seed = 0);

// ---- waveform stub ----------------------------------------------------------

// Each non-EOS token becomes one `chunk` of samples holding four exact-bin
// tones (one per FSQ dimension, frequency selected by the level index); the
// EOS token becomes a silent chunk. Deterministic and invertible.
Waveform synthesize_waveform_stub(const std::vector<int>& tokens, const FSQConfig& cfg,
                                  int sample_rate = 16000, int chunk = 320);

// Reads the token-band bins back out of a stub waveform (chunks whose
// token-band peak is below the silence threshold map to EOS).
std::vector<int> stub_extract_tokens(const Waveform& w, const FSQConfig& cfg, int chunk = 320);

// Throws unless ids are in range and EOS appears at most once, at the end.
void validate_speech_tokens(const std::vector<int>& tokens, const FSQConfig& cfg);

}  // namespace emomni
