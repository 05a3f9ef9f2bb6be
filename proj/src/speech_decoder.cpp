#include "emomni/speech_decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace emomni {

// ---- gate fusion -----------------------------------------------------------

void init_gate(ParamStore& ps, int d_model) {
    ps.set("gate.w", Mat(2 * d_model, d_model, 0.0));
    ps.set("gate.b", Mat(1, d_model, 0.0));
}

int gate_fusion_nodes(Tape& t, int h_text, int h_out, int w, int b) {
    if (!t.val(h_text).same_shape(t.val(h_out)))
        throw std::invalid_argument("gate_fusion: shape mismatch");
    int alpha = t.sigmoid(t.add_rowvec(t.matmul(t.concat_cols(h_text, h_out), w), b));
    int one_minus = t.add_const(t.scale(alpha, -1.0), 1.0);
    return t.add(t.mul(alpha, h_text), t.mul(one_minus, h_out));
}

Mat gate_fusion(ParamStore& ps, const Mat& h_text, const Mat& h_out) {
    Tape t;
    return t.val(gate_fusion_nodes(t, t.leaf(h_text), t.leaf(h_out), t.leaf(ps.get("gate.w")),
                                   t.leaf(ps.get("gate.b"))));
}

// ---- adaptive layer normalization -------------------------------------------

void init_adaln(ParamStore& ps, int d_e, int d_model) {
    ps.set("adaln.gamma_map", Mat(d_e, d_model, 0.0));
    ps.set("adaln.beta_map", Mat(d_e, d_model, 0.0));
}

int adaln_nodes(Tape& t, int h, int e, int gamma_map, int beta_map, double eps) {
    if (t.val(h).rows != t.val(e).rows)
        throw std::invalid_argument("adaln: h and e row counts differ");
    int normed = t.layer_norm(h, eps);
    int gamma = t.add_const(t.matmul(e, gamma_map), 1.0);  // gamma(e) = 1 + e @ map
    int beta = t.matmul(e, beta_map);
    return t.add(t.mul(normed, gamma), beta);
}

Mat adaln(ParamStore& ps, const Mat& h, const Mat& e, double eps) {
    Tape t;
    return t.val(adaln_nodes(t, t.leaf(h), t.leaf(e), t.leaf(ps.get("adaln.gamma_map")),
                             t.leaf(ps.get("adaln.beta_map")), eps));
}

// ---- finite scalar quantization ----------------------------------------------

FSQConfig fsq_config_from(const RunConfig& cfg) {
    FSQConfig f;
    f.levels = cfg.get_int_list("fsq.levels");
    return f;
}

static void check_levels(const FSQConfig& cfg) {
    if (cfg.levels.empty()) throw std::invalid_argument("fsq: empty level list");
    for (int l : cfg.levels)
        if (l < 2) throw std::invalid_argument("fsq: every level must be >= 2");
}

int fsq_codebook_size(const FSQConfig& cfg) {
    check_levels(cfg);
    long long n = 1;
    for (int l : cfg.levels) {
        n *= l;
        if (n > (1 << 30)) throw std::invalid_argument("fsq: codebook too large");
    }
    return int(n);
}

int fsq_quantize(const std::vector<double>& x, const FSQConfig& cfg) {
    check_levels(cfg);
    if (x.size() != cfg.levels.size())
        throw std::invalid_argument("fsq: input dim " + std::to_string(x.size()) +
                                    " != levels dim " + std::to_string(cfg.levels.size()));
    int id = 0;
    for (size_t d = 0; d < x.size(); ++d) {
        if (!std::isfinite(x[d])) throw std::invalid_argument("fsq: non-finite input");
        const int l = cfg.levels[d];
        // bound to [-1,1], then snap to the nearest of l uniform values
        const double v = x[d] < -1.0 ? -1.0 : (x[d] > 1.0 ? 1.0 : x[d]);
        int idx = int(std::lround((v + 1.0) * 0.5 * double(l - 1)));
        if (idx < 0) idx = 0;
        if (idx >= l) idx = l - 1;
        id = id * l + idx;  // dimension 0 most significant
    }
    return id;
}

std::vector<double> fsq_dequantize(int id, const FSQConfig& cfg) {
    const int size = fsq_codebook_size(cfg);
    if (id < 0 || id >= size)
        throw std::invalid_argument("fsq: id " + std::to_string(id) + " outside codebook of " +
                                    std::to_string(size));
    std::vector<double> out(cfg.levels.size());
    for (int d = int(cfg.levels.size()) - 1; d >= 0; --d) {
        const int l = cfg.levels[d];
        const int idx = id % l;
        id /= l;
        out[d] = -1.0 + 2.0 * double(idx) / double(l - 1);
    }
    return out;
}

// ---- speech-token decoder -----------------------------------------------------

SpeechDecoderConfig speech_decoder_config_from(const RunConfig& cfg) {
    SpeechDecoderConfig d;
    d.t.layers = cfg.get_int("decoder.layers");
    d.t.heads = cfg.get_int("decoder.heads");
    d.t.d_model = cfg.get_int("dims.d_model");
    d.t.mlp_mult = cfg.get_int("decoder.mlp_mult");
    d.fsq = fsq_config_from(cfg);
    d.max_len = cfg.get_int("decoder.max_len");
    d.max_ratio = cfg.get_double("speech.max_ratio");
    if (d.max_ratio <= 0) throw std::invalid_argument("speech decoder: max_ratio must be positive");
    return d;
}

void init_speech_decoder(ParamStore& ps, const SpeechDecoderConfig& cfg, uint64_t seed) {
    init_transformer(ps, "speech_decoder", cfg.t, seed);
    const int d = cfg.t.d_model;
    const int vocab = fsq_codebook_size(cfg.fsq) + 1;  // + end-of-speech
    ps.set("speech_decoder.tok_embed",
           mat_randn(vocab, d, 0.08, seed ^ fnv1a("speech_decoder.tok_embed")));
    ps.set("speech_decoder.tok_pos",
           mat_randn(cfg.max_len, d, 0.02, seed ^ fnv1a("speech_decoder.tok_pos")));
    ps.set("speech_decoder.prefix_pos",
           mat_randn(cfg.max_len, d, 0.02, seed ^ fnv1a("speech_decoder.prefix_pos")));
}

int decode_forward_nodes(Tape& t, ParamStore& ps, const SpeechDecoderConfig& cfg, int adapted,
                         const std::vector<int>& tokens, const TrainableFn& trainable) {
    const int vocab = fsq_codebook_size(cfg.fsq) + 1;
    const int P = t.val(adapted).rows;
    const int T = int(tokens.size());
    if (P < 1) throw std::invalid_argument("speech decoder: empty prefix");
    if (t.val(adapted).cols != cfg.t.d_model)
        throw std::invalid_argument("speech decoder: prefix dim != d_model");
    for (int id : tokens)
        if (id < 0 || id >= vocab)
            throw std::out_of_range("speech decoder: token id " + std::to_string(id));
    if (P + T > cfg.max_len)
        throw std::invalid_argument("speech decoder: total length " + std::to_string(P + T) +
                                    " exceeds max_len " + std::to_string(cfg.max_len));

    int embed_table = t.param(ps, "speech_decoder.tok_embed", trainable("speech_decoder.tok_embed"));
    int ppos = t.param(ps, "speech_decoder.prefix_pos", trainable("speech_decoder.prefix_pos"));
    int x = t.add(adapted, t.slice_rows(ppos, 0, P));
    if (T > 0) {
        int tok_pos = t.param(ps, "speech_decoder.tok_pos", trainable("speech_decoder.tok_pos"));
        int emb = t.add(t.embed(embed_table, tokens), t.slice_rows(tok_pos, 0, T));
        x = t.concat_rows(x, emb);
    }
    int h_all = transformer_nodes(t, ps, "speech_decoder", cfg.t, x, trainable);
    // prediction rows: last prefix position plus every token position
    int h = t.slice_rows(h_all, P - 1, P + T);
    return t.matmul_nt(h, embed_table);
}

Mat decode_forward(ParamStore& ps, const SpeechDecoderConfig& cfg, const Mat& adapted,
                   const std::vector<int>& tokens) {
    Tape t;
    return t.val(decode_forward_nodes(t, ps, cfg, t.leaf(adapted), tokens, all_frozen()));
}

std::vector<int> generate_speech(ParamStore& ps, const SpeechDecoderConfig& cfg,
                                 const Mat& adapted, GenMode mode, uint64_t seed) {
    const int eos = speech_eos_id(cfg.fsq);
    // the ratio cap never exceeds what the positional tables can attend over:
    // the forward pass that emits token t sees adapted.rows + t - 1 positions
    const int room = cfg.max_len - adapted.rows + 1;
    if (room < 1)
        throw std::invalid_argument("speech decoder: prefix of " +
                                    std::to_string(adapted.rows) +
                                    " rows leaves no room to generate (max_len " +
                                    std::to_string(cfg.max_len) + ")");
    const int cap = std::min(int(std::ceil(cfg.max_ratio * double(adapted.rows))), room);
    Rng rng(seed);
    std::vector<int> out;
    while (int(out.size()) < cap) {
        Mat logits = decode_forward(ps, cfg, adapted, out);
        const int row = logits.rows - 1;
        int id;
        if (mode == GenMode::Greedy) {
            id = 0;
            for (int j = 1; j < logits.cols; ++j)
                if (logits.at(row, j) > logits.at(row, id)) id = j;
        } else {
            double mx = logits.at(row, 0);
            for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.at(row, j));
            double z = 0.0;
            for (int j = 0; j < logits.cols; ++j) z += std::exp(logits.at(row, j) - mx);
            double u = rng.uniform() * z, acc = 0.0;
            id = logits.cols - 1;
            for (int j = 0; j < logits.cols; ++j) {
                acc += std::exp(logits.at(row, j) - mx);
                if (u < acc) {
                    id = j;
                    break;
                }
            }
        }
        out.push_back(id);
        if (id == eos) break;
    }
    return out;
}

// ---- waveform stub --------------------------------------------------------------

void validate_speech_tokens(const std::vector<int>& tokens, const FSQConfig& cfg) {
    const int eos = speech_eos_id(cfg);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] > eos)
            throw std::invalid_argument("speech tokens: id " + std::to_string(tokens[i]) +
                                        " out of range");
        if (tokens[i] == eos && i + 1 != tokens.size())
            throw std::invalid_argument("speech tokens: end-of-speech at position " +
                                        std::to_string(i) + " is not final");
    }
}

Waveform synthesize_waveform_stub(const std::vector<int>& tokens, const FSQConfig& cfg,
                                  int sample_rate, int chunk) {
    validate_speech_tokens(tokens, cfg);
    if (cfg.levels.size() != 4)
        throw std::invalid_argument("waveform stub: exactly 4 FSQ dimensions supported");
    for (int d = 0; d < 4; ++d)
        if (cfg.levels[d] > bands::kTokenMaxLevels[d])
            throw std::invalid_argument("waveform stub: level count overflows band " +
                                        std::to_string(d));
    const int eos = speech_eos_id(cfg);
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.assign(size_t(tokens.size()) * chunk, 0.0);
    const double two_pi = 6.283185307179586476925286766559;
    for (size_t ti = 0; ti < tokens.size(); ++ti) {
        if (tokens[ti] == eos) continue;  // silence marks end of speech
        // recover the level tuple; indices select exact-bin tone frequencies
        int rest = tokens[ti];
        int idx[4];
        for (int d = 3; d >= 0; --d) {
            idx[d] = rest % cfg.levels[d];
            rest /= cfg.levels[d];
        }
        double* dst = w.samples.data() + ti * chunk;
        for (int d = 0; d < 4; ++d) {
            const double f = bands::kTokenBase[d] + bands::kStep * idx[d];
            const double a = bands::kTokenAmp[d];
            for (int i = 0; i < chunk; ++i) dst[i] += a * std::sin(two_pi * f * i / sample_rate);
        }
    }
    return w;
}

std::vector<int> stub_extract_tokens(const Waveform& w, const FSQConfig& cfg, int chunk) {
    validate_waveform(w);
    if (cfg.levels.size() != 4)
        throw std::invalid_argument("waveform stub: exactly 4 FSQ dimensions supported");
    const int n = int(w.samples.size());
    const int T = n / chunk;  // trailing partial chunks carry no token
    const double silence_threshold = 0.02;
    std::vector<int> out;
    out.reserve(T);
    for (int t = 0; t < T; ++t) {
        const double* x = w.samples.data() + size_t(t) * chunk;
        int id = 0;
        double peak = 0.0;
        for (int d = 0; d < 4; ++d) {
            int best = 0;
            double best_amp = -1.0;
            for (int l = 0; l < cfg.levels[d]; ++l) {
                const double amp = goertzel_amp(x, chunk, bands::kTokenBase[d] + bands::kStep * l,
                                                double(w.sample_rate));
                if (amp > best_amp) {
                    best_amp = amp;
                    best = l;
                }
            }
            peak = std::max(peak, best_amp);
            id = id * cfg.levels[d] + best;
        }
        if (peak < silence_threshold) {
            out.push_back(speech_eos_id(cfg));
            break;
        }
        out.push_back(id);
    }
    return out;
}

}  // namespace emomni
