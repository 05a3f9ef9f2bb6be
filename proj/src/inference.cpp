#include "emomni/inference.hpp"

#include <stdexcept>

namespace emomni {

bool checkpoint_uses_gate(Stage s) {
    switch (s) {
        case Stage::S2_2: return true;
        case Stage::S2_1: return false;
        case Stage::S1:
            throw std::invalid_argument(
                "a stage s1 checkpoint cannot drive speech generation; "
                "train stage s2.1 or s2.2 first");
    }
    throw std::invalid_argument("unknown stage");
}

InferenceResult run_inference(Model& m, const Waveform& query, const InferOptions& opt) {
    InferenceResult r;
    const Mat prefix = encode_query_prefix(m, query);
    const int budget = m.backbone.max_len - prefix.rows - 1;  // one slot for the start marker
    if (budget < 1)
        throw std::invalid_argument("query prefix of " + std::to_string(prefix.rows) +
                                    " rows leaves no room for text generation");
    const int max_new =
        opt.max_text_tokens > 0 ? std::min(opt.max_text_tokens, budget) : budget;
    std::vector<int> gen =
        backbone_generate(m.params, m.backbone, prefix, max_new, opt.text_mode, opt.seed);
    for (int id : gen) {
        if (id == kEosId) break;
        r.response_ids.push_back(id);
    }
    r.response_text = ids_to_text(r.response_ids);

    std::vector<int> in_tokens;
    in_tokens.reserve(r.response_ids.size() + 1);
    in_tokens.push_back(kBosId);
    in_tokens.insert(in_tokens.end(), r.response_ids.begin(), r.response_ids.end());
    const Mat h_text = response_text_embeddings(m, r.response_ids);
    const Mat h_out = backbone_forward(m.params, m.backbone, prefix, in_tokens).first;
    r.emotion_pred = emotion_head_predict(m.params, h_out);

    const Mat fused = opt.use_gate ? gate_fusion(m.params, h_text, h_out) : h_text;
    const Mat adapted = adaln(m.params, fused, r.emotion_pred, m.cfg.get_double("adaln.eps"));
    r.speech_tokens = generate_speech(m.params, m.decoder, adapted, opt.speech_mode,
                                      opt.seed ^ fnv1a("speech"));
    r.waveform = synthesize_waveform_stub(r.speech_tokens, m.decoder.fsq,
                                          m.cfg.get_int("speech.sample_rate"),
                                          m.cfg.get_int("speech.chunk_samples"));
    return r;
}

}  // namespace emomni
