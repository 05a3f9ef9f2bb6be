// inference.hpp : end-to-end reply generation from a spoken query
#pragma once

#include "emomni/training.hpp"

namespace emomni {

struct InferOptions {
    bool use_gate = true;  // stage 2.2 checkpoints fuse; stage 2.1 bypasses the gate
    GenMode text_mode = GenMode::Greedy;
    GenMode speech_mode = GenMode::Greedy;
    uint64_t seed = 0;
    int max_text_tokens = 0;  // 0 = whatever the backbone's position budget allows
};

struct InferenceResult {
    std::string response_text;
    std::vector<int> response_ids;   // generated text ids, end marker stripped
    Mat emotion_pred;                // predicted response-emotion features, one row per position
    std::vector<int> speech_tokens;  // generated speech ids, end-of-speech included when fired
    Waveform waveform;               // stub synthesis of the speech tokens
};

// Whether a checkpoint from this stage drives the gate at inference.
// Stage 1 checkpoints cannot generate speech and are rejected.
bool checkpoint_uses_gate(Stage s);

// encode query -> backbone text generation -> emotion prediction -> gate/AdaLN
// conditioning -> speech-token generation -> waveform stub.
InferenceResult run_inference(Model& m, const Waveform& query, const InferOptions& opt = {});

}  // namespace emomni
