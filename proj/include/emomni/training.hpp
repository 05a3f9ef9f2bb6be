// training.hpp : staged training schedule, parameter freezing, checkpoints
#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "emomni/backbone.hpp"
#include "emomni/emotion_head.hpp"
#include "emomni/features.hpp"
#include "emomni/speech_decoder.hpp"

namespace emomni {

// ---- stages -----------------------------------------------------------------

enum class Stage { S1, S2_1, S2_2 };

std::string stage_name(Stage s);               // "s1", "s2.1", "s2.2"
Stage stage_from_name(const std::string& s);   // accepts the names above

// Which parameter names a stage's optimizer may update:
//   s1   : fusion projection, backbone prefix positions, backbone adapters,
//          emotion head
//   s2.1 : speech decoder (embeddings included) and the AdaLN maps
//   s2.2 : everything in s2.1 plus the gate
// Encoders own no parameters, so they are outside every set by construction.
bool in_stage_partition(Stage s, const std::string& name);
TrainableFn stage_trainable(Stage s);

struct StageConfig {
    Stage stage = Stage::S1;
    int steps = 1;
    double learning_rate = 0.05;
    int batch_size = 1;
    uint64_t seed = 7;
    EmotionLossConfig loss;
};

StageConfig stage_config_from(const RunConfig& cfg, Stage s);

// ---- checkpoints --------------------------------------------------------------

// Binary format, version 1: magic "EMCK", version, stage, step, a config
// snapshot, then every named parameter (shape + row-major little-endian
// doubles) in name order. Save -> load -> save is byte-identical.
struct Checkpoint {
    int format_version = 1;
    Stage stage = Stage::S1;
    int64_t step = 0;
    std::string config_text;
    ParamStore params;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into an existing model store. The name sets must
// match exactly; any difference is reported by name.
void apply_checkpoint(const Checkpoint& ck, ParamStore& model);

// ---- model assembly -------------------------------------------------------------

// Every trainable component over one shared parameter store, plus the frozen
// encoders. Built deterministically from the run configuration.
struct Model {
    RunConfig cfg;
    BackboneConfig backbone;
    SpeechDecoderConfig decoder;
    EmotionLossConfig loss;
    int k_sem = 5;
    int k_emo = 5;
    std::shared_ptr<EncoderInterface> sem_enc;
    std::shared_ptr<EncoderInterface> emo_enc;
    ParamStore params;
};

Model build_model(const RunConfig& cfg);

// Query audio -> encoded, downsampled, aligned, fused prefix (pure).
Mat encode_query_prefix(const Model& m, const Waveform& query);

// Token embeddings of [BOS] + the response bytes (no positions); the rows the
// speech decoder treats as text-side input.
Mat response_text_embeddings(const Model& m, const std::vector<int>& response_ids);

// ---- training data ---------------------------------------------------------------

struct TrainExample {
    std::string id;
    Waveform query_audio;
    Waveform response_audio;
    std::string response_text;
    std::vector<int> speech_tokens;  // response speech ids, trailing EOS included
};

// Deterministic batch order: example index for the pos-th sample drawn since
// step 0 (pos = step * batch_size + slot). Pure in (seed, pos, n); each epoch
// of n draws visits every example once in a seeded shuffle.
int batch_index(uint64_t seed, long long pos, int n);

// ---- stage runners -----------------------------------------------------------------

struct StageResult {
    Checkpoint checkpoint;
    std::vector<double> losses;  // one entry per executed step
};

// Mean total stage-1 loss (text cross-entropy + lambda * emotion loss) over
// the given examples, without updating anything.
double total_loss_stage1(const Model& m, const std::vector<TrainExample>& batch,
                         const StageConfig& cfg);

// Plain-SGD stage loops. Each logs `step=<n> stage=<s> loss=<v>` lines
// (stage 1 adds ` emo_loss=<v>`), aborts on non-finite loss, and only ever
// updates its stage partition. `start_step` supports resuming; steps run are
// start_step+1 .. cfg.steps.
StageResult run_stage1(Model& m, const std::vector<TrainExample>& data, const StageConfig& cfg,
                       std::ostream* log = nullptr, int start_step = 0);
StageResult run_stage2_1(Model& m, const std::vector<TrainExample>& data, const StageConfig& cfg,
                         std::ostream* log = nullptr, int start_step = 0);
StageResult run_stage2_2(Model& m, const std::vector<TrainExample>& data, const StageConfig& cfg,
                         std::ostream* log = nullptr, int start_step = 0);

}  // namespace emomni
