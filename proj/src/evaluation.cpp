#include "emomni/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "emomni/io.hpp"

namespace emomni {

// ---- word error rate ---------------------------------------------------------

std::string normalize_for_wer(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u))
            out.push_back(char(std::tolower(u)));
        else
            out.push_back(' ');
    }
    return out;
}

static std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(normalize_for_wer(text));
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

WERResult wer(const std::string& reference, const std::string& hypothesis) {
    const std::vector<std::string> ref = words_of(reference);
    const std::vector<std::string> hyp = words_of(hypothesis);
    if (ref.empty())
        throw std::invalid_argument("reference transcript has no words after normalization");
    const size_t R = ref.size(), H = hyp.size();
    // Lexicographic DP: minimal edit cost, then minimal deletions among the
    // minimal-cost alignments. Any alignment satisfies I-D = H-R and
    // S+2D = cost-(H-R), so minimizing D maximizes substitutions — the
    // substitution-over-insertion-over-deletion preference — and makes the
    // counts exact mirrors under swapping reference and hypothesis.
    struct Cell {
        int cost;
        int dels;
    };
    auto better = [](const Cell& a, const Cell& b) {
        return a.cost < b.cost || (a.cost == b.cost && a.dels < b.dels);
    };
    std::vector<std::vector<Cell>> d(R + 1, std::vector<Cell>(H + 1, Cell{0, 0}));
    for (size_t i = 1; i <= R; ++i) d[i][0] = Cell{int(i), int(i)};
    for (size_t j = 1; j <= H; ++j) d[0][j] = Cell{int(j), 0};
    for (size_t i = 1; i <= R; ++i)
        for (size_t j = 1; j <= H; ++j) {
            Cell best{d[i - 1][j - 1].cost + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                      d[i - 1][j - 1].dels};
            Cell ins{d[i][j - 1].cost + 1, d[i][j - 1].dels};
            Cell del{d[i - 1][j].cost + 1, d[i - 1][j].dels + 1};
            if (better(ins, best)) best = ins;
            if (better(del, best)) best = del;
            d[i][j] = best;
        }

    WERResult r;
    r.ref_words = int(R);
    const Cell end = d[R][H];
    r.deletions = end.dels;
    r.insertions = end.dels + int(H) - int(R);
    r.substitutions = end.cost - r.insertions - r.deletions;
    r.wer = double(end.cost) / double(r.ref_words);
    return r;
}

// ---- emotion judging ------------------------------------------------------------

MockJudge::MockJudge(const RunConfig& cfg)
    : empathy_(empathy_map(cfg)),
      soothing_(cfg.get_str_list("judge.soothing_family")),
      positive_(cfg.get_str_list("judge.positive_family")) {}

static bool in_family(const std::vector<std::string>& family, const std::string& label) {
    return std::find(family.begin(), family.end(), label) != family.end();
}

EmotionJudgment MockJudge::judge(const JudgeInput& input) const {
    auto it = empathy_.find(input.query_emotion);
    if (it == empathy_.end())
        throw std::invalid_argument("no empathy mapping configured for emotion '" +
                                    input.query_emotion + "'");
    const std::string& expected = it->second;
    const std::string& got = input.response_emotion_label;
    EmotionJudgment j;
    if (got == expected) {
        j.score = 5;
        j.rationale = "response style '" + got + "' is exactly the empathetic style for '" +
                      input.query_emotion + "'";
    } else if ((in_family(soothing_, expected) && in_family(soothing_, got)) ||
               (in_family(positive_, expected) && in_family(positive_, got))) {
        j.score = 4;
        j.rationale = "response style '" + got + "' shares a family with expected '" + expected +
                      "'";
    } else if (got == "neutral" || expected == "neutral") {
        j.score = 3;
        j.rationale = "neutral delivery neither matches nor clashes with expected '" + expected +
                      "'";
    } else if (in_family(soothing_, expected) && in_family(positive_, got)) {
        j.score = 1;
        j.rationale = "upbeat style '" + got + "' clashes with the soothing response '" +
                      expected + "' the query needed";
    } else {
        j.score = 2;
        j.rationale = "response style '" + got + "' does not fit expected '" + expected + "'";
    }
    return j;
}

std::string external_judge_prompt(const JudgeInput& input) {
    return "You are rating an empathetic voice assistant.\n"
           "The user said: \"" + input.query_text + "\" feeling " + input.query_emotion + ".\n"
           "The assistant replied: \"" + input.response_text + "\" in a " +
           input.response_emotion_label + " style.\n"
           "Rate from 1 (emotionally inappropriate) to 5 (perfectly empathetic). "
           "Answer with the number only.";
}

namespace {

class ExternalJudge : public EmotionJudge {
public:
    std::string name() const override { return "external"; }
    EmotionJudgment judge(const JudgeInput& input) const override {
        (void)external_judge_prompt(input);  // what the service would receive
        throw std::runtime_error("external judge needs a network service; "
                                 "use judge 'mock' for offline runs");
    }
};

}  // namespace

std::unique_ptr<EmotionJudge> make_judge(const std::string& name, const RunConfig& cfg) {
    if (name == "mock") return std::make_unique<MockJudge>(cfg);
    if (name == "external") return std::make_unique<ExternalJudge>();
    throw std::invalid_argument("unknown judge backend '" + name + "'");
}

// ---- corpus evaluation ------------------------------------------------------------

EvaluationReport evaluate_corpus(const std::vector<DialogueRecord>& records,
                                 const std::vector<ModelOutput>& outputs,
                                 const EmotionJudge& judge, const RunConfig& cfg) {
    const FSQConfig fsq = fsq_config_from(cfg);
    const std::vector<std::string> labels = union_emotion_labels(cfg);

    std::set<std::string> known;
    for (const DialogueRecord& r : records) known.insert(r.id);
    std::map<std::string, const ModelOutput*> by_id;
    for (const ModelOutput& o : outputs) {
        if (!known.count(o.id))
            throw std::invalid_argument("output for unknown record id '" + o.id + "'");
        if (!by_id.emplace(o.id, &o).second)
            throw std::invalid_argument("duplicate output for record id '" + o.id + "'");
    }

    std::vector<DialogueRecord> ordered = records;
    std::sort(ordered.begin(), ordered.end(),
              [](const DialogueRecord& a, const DialogueRecord& b) { return a.id < b.id; });

    EvaluationReport rep;
    double wer_sum = 0.0;
    long long score_sum = 0;
    int n_scored = 0;
    for (const DialogueRecord& rec : ordered) {
        auto it = by_id.find(rec.id);
        if (it == by_id.end()) {
            rep.missing.push_back(rec.id);
            continue;
        }
        const ModelOutput& out = *it->second;
        RecordEval ev;
        ev.id = rec.id;
        ev.transcription = speech_tokens_to_text(out.speech_tokens, fsq);
        const int style = speech_tokens_style(out.speech_tokens, fsq);
        if (style < 0)
            ev.response_label = "neutral";  // nothing voiced reads as flat delivery
        else if (style < int(labels.size()))
            ev.response_label = labels[size_t(style)];
        else
            ev.response_label = "unrecognized";
        ev.wer = wer(rec.response_text, ev.transcription);
        try {
            JudgeInput in;
            in.query_text = rec.query_text;
            in.query_emotion = rec.emotion_label;
            in.response_text = ev.transcription;
            in.response_emotion_label = ev.response_label;
            ev.judgment = judge.judge(in);
            ev.scored = true;
            score_sum += ev.judgment.score;
            ++n_scored;
        } catch (const std::exception& e) {
            ev.scored = false;
            ev.judgment = EmotionJudgment{0, std::string("unscored: ") + e.what()};
            rep.unscored.push_back(rec.id);
        }
        wer_sum += ev.wer.wer;
        rep.records.push_back(std::move(ev));
    }
    rep.n = int(rep.records.size());
    rep.mean_wer = rep.n ? wer_sum / rep.n : 0.0;
    rep.mean_score = n_scored ? double(score_sum) / n_scored : 0.0;
    return rep;
}

static std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string report_to_text(const EvaluationReport& report) {
    std::string text;
    text += "mean_wer_percent=" + fmt(report.mean_wer * 100.0) + "\n";
    text += "mean_emotion_score=" + fmt(report.mean_score) + "\n";
    text += "n=" + std::to_string(report.n) + "\n";
    for (const RecordEval& r : report.records) {
        text += r.id + "\t" + fmt(r.wer.wer * 100.0) + "\t" + std::to_string(r.wer.substitutions) +
                "\t" + std::to_string(r.wer.insertions) + "\t" +
                std::to_string(r.wer.deletions) + "\t" + std::to_string(r.wer.ref_words) + "\t" +
                (r.scored ? std::to_string(r.judgment.score) : "-") + "\t" + r.response_label +
                "\t" + escape_field(r.judgment.rationale) + "\n";
    }
    for (const std::string& id : report.missing) text += "missing\t" + id + "\n";
    for (const std::string& id : report.unscored) text += "unscored\t" + id + "\n";
    return text;
}

void write_outputs_file(const std::vector<ModelOutput>& outputs, const std::string& path) {
    std::string text;
    for (const ModelOutput& o : outputs) {
        if (o.id.empty()) throw std::invalid_argument("model output with empty id");
        text += escape_field(o.id) + "\t" + escape_field(o.response_text) + "\t";
        for (size_t i = 0; i < o.speech_tokens.size(); ++i) {
            if (i) text += ' ';
            text += std::to_string(o.speech_tokens[i]);
        }
        text += '\n';
    }
    write_text_file(path, text);
}

std::vector<ModelOutput> read_outputs_file(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<ModelOutput> outputs;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
            throw std::runtime_error("outputs line " + std::to_string(line_no) +
                                     ": expected 3 tab-separated fields");
        ModelOutput o;
        o.id = unescape_field(line.substr(0, t1));
        o.response_text = unescape_field(line.substr(t1 + 1, t2 - t1 - 1));
        std::istringstream in(line.substr(t2 + 1));
        std::string tok;
        while (in >> tok) {
            try {
                size_t used = 0;
                const int id = std::stoi(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
                o.speech_tokens.push_back(id);
            } catch (const std::exception&) {
                throw std::runtime_error("outputs line " + std::to_string(line_no) +
                                         ": bad token id '" + tok + "'");
            }
        }
        if (o.id.empty())
            throw std::runtime_error("outputs line " + std::to_string(line_no) +
                                     ": empty record id");
        outputs.push_back(std::move(o));
    }
    return outputs;
}

}  // namespace emomni
