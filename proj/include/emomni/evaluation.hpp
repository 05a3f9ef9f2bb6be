// evaluation.hpp : word-error-rate, emotion-consistency judging, corpus reports
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emomni/datapipe.hpp"

namespace emomni {

// ---- word error rate ---------------------------------------------------------

struct WERResult {
    int substitutions = 0;
    int insertions = 0;
    int deletions = 0;
    int ref_words = 0;
    double wer = 0.0;  // (S+I+D) / ref_words
};

// Lowercases and turns every non-alphanumeric character into a space.
std::string normalize_for_wer(const std::string& text);

// Minimal word-level edit distance; ties resolve substitution, then insertion,
// then deletion. Throws if the reference normalizes to no words.
WERResult wer(const std::string& reference, const std::string& hypothesis);

// ---- emotion judging ------------------------------------------------------------

struct EmotionJudgment {
    int score = 0;  // 1..5
    std::string rationale;
};

struct JudgeInput {
    std::string query_text;
    std::string query_emotion;           // label the query was produced with
    std::string response_text;
    std::string response_emotion_label;  // style the response expressed
};

class EmotionJudge {
public:
    virtual ~EmotionJudge() = default;
    virtual std::string name() const = 0;
    // Throwing marks the record unscored; the pipeline continues.
    virtual EmotionJudgment judge(const JudgeInput& input) const = 0;
};

// Deterministic rubric over the empathy table and the configured style
// families: expected style 5, same family 4, either side neutral 3, soothing
// expected but upbeat delivered 1, any other mismatch 2.
class MockJudge : public EmotionJudge {
public:
    explicit MockJudge(const RunConfig& cfg);
    std::string name() const override { return "mock"; }
    EmotionJudgment judge(const JudgeInput& input) const override;

private:
    std::map<std::string, std::string> empathy_;
    std::vector<std::string> soothing_;
    std::vector<std::string> positive_;
};

// Prompt an external service would receive; kept visible for inspection.
std::string external_judge_prompt(const JudgeInput& input);

std::unique_ptr<EmotionJudge> make_judge(const std::string& name, const RunConfig& cfg);

// ---- corpus evaluation ------------------------------------------------------------

// One model output per record: the generated reply text and speech tokens.
struct ModelOutput {
    std::string id;
    std::string response_text;
    std::vector<int> speech_tokens;
};

struct RecordEval {
    std::string id;
    std::string transcription;    // generated tokens read back as text
    std::string response_label;   // style the generated tokens express
    WERResult wer;
    bool scored = false;          // judge produced a score
    EmotionJudgment judgment;
};

struct EvaluationReport {
    std::vector<RecordEval> records;     // ordered by id
    std::vector<std::string> missing;    // manifest ids with no output
    std::vector<std::string> unscored;   // judge failures
    double mean_wer = 0.0;               // fraction, over evaluated records
    double mean_score = 0.0;             // over scored records
    int n = 0;                           // evaluated records
};

// Pairs manifest records with outputs by id; missing outputs are reported and
// excluded from aggregates. Duplicate or unknown output ids are errors.
EvaluationReport evaluate_corpus(const std::vector<DialogueRecord>& records,
                                 const std::vector<ModelOutput>& outputs,
                                 const EmotionJudge& judge, const RunConfig& cfg);

// Header lines `mean_wer_percent=`, `mean_emotion_score=`, `n=`, then one
// tab-separated line per record, then `missing`/`unscored` lines.
std::string report_to_text(const EvaluationReport& report);

// Model outputs on disk: one line per record — id, escaped response text,
// space-separated speech-token ids — tab separated.
void write_outputs_file(const std::vector<ModelOutput>& outputs, const std::string& path);
std::vector<ModelOutput> read_outputs_file(const std::string& path);

}  // namespace emomni
