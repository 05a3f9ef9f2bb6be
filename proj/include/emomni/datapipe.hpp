// datapipe.hpp : synthetic emotional-dialogue corpus — text templates, speech
// rendering, emotion filtering, speaker pool, manifest persistence
#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emomni/features.hpp"
#include "emomni/speech_decoder.hpp"
#include "emomni/training.hpp"

namespace emomni {

// ---- speech text alphabet ----------------------------------------------------

// 32 renderable symbols; a character's index and the utterance's style index
// pick the four quantizer levels of its speech token, so token sequences and
// text convert losslessly in both directions.
const std::string& speech_charset();
bool charset_safe(const std::string& text);
// Lowercases and maps anything outside the alphabet to a space.
std::string sanitize_speech_text(const std::string& text);

// Quantizer-space coordinates of one (character, style) pair.
std::vector<double> char_style_features(int char_idx, int style_idx, const FSQConfig& fsq);

// Per-character tokens followed by the end-of-speech id. Throws on characters
// outside the alphabet or a style index the level plan cannot hold.
std::vector<int> text_to_speech_tokens(const std::string& text, int style_idx,
                                       const FSQConfig& fsq);
// Inverse of the character half (stops at end-of-speech).
std::string speech_tokens_to_text(const std::vector<int>& tokens, const FSQConfig& fsq);
// Majority style index over the non-terminal tokens (-1 when empty).
int speech_tokens_style(const std::vector<int>& tokens, const FSQConfig& fsq);

// ---- dialogue records -----------------------------------------------------------

struct DialogueRecord {
    std::string id;
    std::string domain;
    std::string emotion_label;  // query-side emotion
    std::string speaker_id;
    std::string query_text;
    std::string response_text;
    std::string query_audio_path;
    std::string response_audio_path;
    std::string speech_token_path;
};

struct Speaker {
    std::string id;   // "m0".."m4", "f0".."f4"
    bool male = true;
    int index = 0;    // carrier-frequency slot
};

struct SpeakerPool {
    std::vector<Speaker> speakers;
};

// Half male, half female; n must be even, >= 2, and fit the carrier band.
SpeakerPool make_speaker_pool(int n);

// Query emotion -> response style, from the `empathy.*` config table.
std::map<std::string, std::string> empathy_map(const RunConfig& cfg);
std::string response_style_for(const RunConfig& cfg, const std::string& query_emotion);

// ---- pluggable backends -----------------------------------------------------------

class TextGenBackend {
public:
    virtual ~TextGenBackend() = default;
    virtual std::string name() const = 0;
    virtual bool deterministic() const = 0;
    // (query_text, response_text) for one record.
    virtual std::pair<std::string, std::string> dialogue(const std::string& domain,
                                                         const std::string& query_emotion,
                                                         const std::string& response_style,
                                                         uint64_t seed, int record_index) const = 0;
};

class TTSBackend {
public:
    virtual ~TTSBackend() = default;
    virtual std::string name() const = 0;
    virtual bool deterministic() const = 0;
    virtual Waveform synthesize(const std::vector<int>& speech_tokens, int emotion_idx,
                                int speaker_idx) const = 0;
};

class EmotionClassifier {
public:
    virtual ~EmotionClassifier() = default;
    virtual std::string name() const = 0;
    virtual const std::vector<std::string>& labels() const = 0;
    // One confidence per label, nonnegative, summing to ~1.
    virtual std::vector<double> scores(const Waveform& w) const = 0;

    std::pair<std::string, double> classify(const Waveform& w) const;
    double label_confidence(const Waveform& w, const std::string& label) const;
};

std::unique_ptr<TextGenBackend> make_text_backend(const std::string& name, const RunConfig& cfg);
std::unique_ptr<TTSBackend> make_tts_backend(const std::string& name, const RunConfig& cfg);
// "synthetic" reads the emotion carrier; "flipmock" wraps it but misreports
// roughly one record in ten (keyed by the waveform bytes) for filter tests.
std::unique_ptr<EmotionClassifier> make_classifier(const std::string& name, const RunConfig& cfg,
                                                   uint64_t seed);

// Stub chunks plus the emotion- and speaker-band carriers on every voiced
// chunk; the terminal silence stays silent.
Waveform render_speech(const std::vector<int>& tokens, const FSQConfig& fsq, int emotion_idx,
                       int speaker_idx, int sample_rate = 16000, int chunk = 320);

// ---- pipeline stages ------------------------------------------------------------------

struct GenFailure {
    std::string id;
    std::string error;
};

// Text-only records: round-robin balanced domains and emotions, backend text.
// Backend failures are collected per record id; the pipeline continues.
std::vector<DialogueRecord> generate_dialogues(const RunConfig& cfg, int n, uint64_t seed,
                                               const TextGenBackend& backend,
                                               std::vector<GenFailure>* failures = nullptr);

// Fills speaker ids (round-robin), writes query/response audio and the
// response token file under out_dir, and returns the completed records. File
// paths are stored relative to out_dir so reruns into different directories
// produce byte-identical manifests.
std::vector<DialogueRecord> synthesize_speech(const std::vector<DialogueRecord>& records,
                                              const SpeakerPool& pool, const RunConfig& cfg,
                                              const TTSBackend& tts, const std::string& out_dir,
                                              std::vector<GenFailure>* failures = nullptr);

// Keeps records whose classifier confidence for their own emotion label (read
// from the query audio) is at least `threshold`; order preserved, records
// untouched. Relative audio paths resolve against base_dir.
std::vector<DialogueRecord> filter_by_emotion(const std::vector<DialogueRecord>& records,
                                              const EmotionClassifier& classifier,
                                              double threshold, const std::string& base_dir = "");

// One record per line, nine tab-separated escaped fields, fixed order.
void write_manifest(const std::vector<DialogueRecord>& records, const std::string& path);
std::vector<DialogueRecord> read_manifest(const std::string& path);

struct DatagenResult {
    std::vector<DialogueRecord> records;  // surviving, in generation order
    int generated = 0;
    int filtered_out = 0;
    std::vector<GenFailure> failures;
    std::string manifest_path;
};

// generate -> synthesize -> filter -> manifest, all under out_dir, fully
// determined by (cfg, out_dir).
DatagenResult run_datagen(const RunConfig& cfg, const std::string& out_dir);

// Loads one manifest record's audio and tokens into a training example.
// Relative paths resolve against base_dir (the manifest's directory).
TrainExample load_train_example(const DialogueRecord& rec, const std::string& base_dir = "");
std::vector<TrainExample> load_train_examples(const std::vector<DialogueRecord>& records,
                                              const std::string& base_dir = "");
// base_dir + "/" + rel unless rel is absolute or base_dir is empty.
std::string resolve_path(const std::string& base_dir, const std::string& rel);

}  // namespace emomni
