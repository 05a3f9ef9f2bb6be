#include "emomni/datapipe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "emomni/io.hpp"

namespace emomni {

// ---- speech text alphabet ----------------------------------------------------

const std::string& speech_charset() {
    static const std::string chars = "abcdefghijklmnopqrstuvwxyz .,'!?";
    return chars;
}

static int charset_index(char c) {
    const std::string& cs = speech_charset();
    auto pos = cs.find(c);
    return pos == std::string::npos ? -1 : int(pos);
}

bool charset_safe(const std::string& text) {
    for (char c : text)
        if (charset_index(c) < 0) return false;
    return true;
}

std::string sanitize_speech_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        char lc = char(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(charset_index(lc) < 0 ? ' ' : lc);
    }
    return out;
}

// Level index -> quantizer grid value on [-1, 1].
static double level_value(int idx, int levels) { return -1.0 + 2.0 * idx / (levels - 1); }

// Digits of a code id, dimension 0 most significant (matches fsq_quantize).
static std::vector<int> fsq_digits(int id, const FSQConfig& fsq) {
    std::vector<int> d(fsq.levels.size());
    int rest = id;
    for (int i = int(fsq.levels.size()) - 1; i >= 0; --i) {
        d[size_t(i)] = rest % fsq.levels[size_t(i)];
        rest /= fsq.levels[size_t(i)];
    }
    return d;
}

std::vector<double> char_style_features(int char_idx, int style_idx, const FSQConfig& fsq) {
    if (fsq.levels.size() != 4)
        throw std::invalid_argument("char/style packing needs exactly 4 quantizer dimensions");
    const int l0 = fsq.levels[0], l1 = fsq.levels[1], l2 = fsq.levels[2], l3 = fsq.levels[3];
    if (char_idx < 0 || char_idx >= int(speech_charset().size()))
        throw std::invalid_argument("character index " + std::to_string(char_idx) +
                                    " outside the speech alphabet");
    const int i0 = char_idx / l1, i1 = char_idx % l1;
    if (i0 >= l0)
        throw std::invalid_argument("quantizer level plan too small for the speech alphabet");
    if (style_idx < 0 || style_idx >= l2 * l3)
        throw std::invalid_argument("style index " + std::to_string(style_idx) +
                                    " outside quantizer capacity " + std::to_string(l2 * l3));
    const int i2 = style_idx % l2, i3 = style_idx / l2;
    return {level_value(i0, l0), level_value(i1, l1), level_value(i2, l2), level_value(i3, l3)};
}

std::vector<int> text_to_speech_tokens(const std::string& text, int style_idx,
                                       const FSQConfig& fsq) {
    std::vector<int> tokens;
    tokens.reserve(text.size() + 1);
    for (char c : text) {
        int ci = charset_index(c);
        if (ci < 0)
            throw std::invalid_argument(std::string("character '") + c +
                                        "' outside the speech alphabet");
        tokens.push_back(fsq_quantize(char_style_features(ci, style_idx, fsq), fsq));
    }
    tokens.push_back(speech_eos_id(fsq));
    return tokens;
}

std::string speech_tokens_to_text(const std::vector<int>& tokens, const FSQConfig& fsq) {
    if (fsq.levels.size() != 4)
        throw std::invalid_argument("char/style packing needs exactly 4 quantizer dimensions");
    const int eos = speech_eos_id(fsq);
    std::string text;
    for (int t : tokens) {
        if (t == eos) break;
        if (t < 0 || t > eos)
            throw std::out_of_range("speech token id " + std::to_string(t) + " out of range");
        std::vector<int> d = fsq_digits(t, fsq);
        int ci = d[0] * fsq.levels[1] + d[1];
        // codes beyond the alphabet (possible in generated sequences) read as space
        text.push_back(ci < int(speech_charset().size()) ? speech_charset()[size_t(ci)] : ' ');
    }
    return text;
}

int speech_tokens_style(const std::vector<int>& tokens, const FSQConfig& fsq) {
    if (fsq.levels.size() != 4)
        throw std::invalid_argument("char/style packing needs exactly 4 quantizer dimensions");
    const int eos = speech_eos_id(fsq);
    std::map<int, int> counts;
    for (int t : tokens) {
        if (t == eos) break;
        if (t < 0 || t > eos)
            throw std::out_of_range("speech token id " + std::to_string(t) + " out of range");
        std::vector<int> d = fsq_digits(t, fsq);
        counts[d[3] * fsq.levels[2] + d[2]]++;
    }
    int best = -1, best_n = 0;
    for (const auto& [style, n] : counts)
        if (n > best_n) { best = style; best_n = n; }
    return best;
}

// ---- speakers and empathy table ---------------------------------------------------

SpeakerPool make_speaker_pool(int n) {
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("speaker pool size must be even and at least 2");
    const int max_n = int((8000.0 - bands::kSpeakerBase) / bands::kSpeakerStep);
    if (n > max_n)
        throw std::invalid_argument("speaker pool size " + std::to_string(n) +
                                    " overflows the speaker carrier band (max " +
                                    std::to_string(max_n) + ")");
    SpeakerPool pool;
    pool.speakers.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        Speaker s;
        s.male = i < n / 2;
        s.id = (s.male ? "m" : "f") + std::to_string(s.male ? i : i - n / 2);
        s.index = i;
        pool.speakers.push_back(s);
    }
    return pool;
}

std::map<std::string, std::string> empathy_map(const RunConfig& cfg) {
    std::map<std::string, std::string> m;
    const std::string prefix = "empathy.";
    for (const auto& [k, v] : cfg.values())
        if (k.rfind(prefix, 0) == 0) m[k.substr(prefix.size())] = v;
    return m;
}

std::string response_style_for(const RunConfig& cfg, const std::string& query_emotion) {
    auto m = empathy_map(cfg);
    auto it = m.find(query_emotion);
    if (it == m.end())
        throw std::invalid_argument("no empathy mapping configured for emotion '" +
                                    query_emotion + "'");
    return it->second;
}

static int label_index(const std::vector<std::string>& labels, const std::string& name) {
    auto it = std::find(labels.begin(), labels.end(), name);
    if (it == labels.end())
        throw std::invalid_argument("unknown emotion label '" + name + "'");
    return int(it - labels.begin());
}

// ---- text backends -------------------------------------------------------------

static std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

namespace {

const std::map<std::string, std::vector<std::string>>& query_templates() {
    static const std::map<std::string, std::vector<std::string>> t = {
        {"happiness",
         {"i am so happy about my {domain} today!",
          "great news from {domain}, i feel wonderful!",
          "my {domain} went really well and i am glad!"}},
        {"sadness",
         {"i feel really sad about my {domain}.",
          "my {domain} fell apart and i am down.",
          "nothing in {domain} goes right for me."}},
        {"anger",
         {"i am furious about this {domain} mess!",
          "this {domain} problem makes me so angry!",
          "i am fed up with my {domain}!"}},
        {"anxiety",
         {"i am worried about my {domain} tomorrow.",
          "my {domain} makes me nervous these days.",
          "i cannot stop fretting over {domain}."}},
        {"surprise",
         {"i did not expect this {domain} news!",
          "wow, my {domain} took a strange turn!",
          "who knew {domain} could change so fast!"}},
        {"neutral",
         {"tell me something about {domain}.",
          "i have a question about {domain}.",
          "what should i know about {domain}?"}},
    };
    return t;
}

const std::map<std::string, std::vector<std::string>>& response_templates() {
    static const std::map<std::string, std::vector<std::string>> t = {
        {"cheerful",
         {"that is wonderful! enjoy your {domain}!",
          "fantastic! your {domain} joy is well earned!",
          "how delightful, keep shining in {domain}!"}},
        {"comforting",
         {"i am sorry about your {domain}. better days will come.",
          "that sounds hard. your {domain} does not define you.",
          "i hear you. let us take {domain} one step at a time."}},
        {"calming",
         {"take a slow breath. we can sort this {domain} out.",
          "your {domain} frustration is fair. let us fix it calmly.",
          "easy now. the {domain} mess has a way through."}},
        {"reassuring",
         {"you are prepared for your {domain}. it will be okay.",
          "one step at a time, your {domain} will work out.",
          "you have handled {domain} before. trust yourself."}},
        {"curious",
         {"oh? tell me more about that {domain} twist!",
          "what a turn! how did the {domain} story unfold?",
          "intriguing! what happened next with {domain}?"}},
        {"neutral",
         {"here is a simple overview of {domain}.",
          "sure. {domain} has a few key points to know.",
          "let us go over the basics of {domain}."}},
    };
    return t;
}

class SyntheticTextBackend : public TextGenBackend {
public:
    std::string name() const override { return "synthetic"; }
    bool deterministic() const override { return true; }
    std::pair<std::string, std::string> dialogue(const std::string& domain,
                                                 const std::string& query_emotion,
                                                 const std::string& response_style, uint64_t seed,
                                                 int record_index) const override {
        const std::string spoken = replace_all(domain, "_", " ");
        return {pick(query_templates(), query_emotion, "query emotion", domain, seed,
                     record_index, spoken),
                pick(response_templates(), response_style, "response style", domain, seed,
                     record_index, spoken)};
    }

private:
    static std::string pick(const std::map<std::string, std::vector<std::string>>& table,
                            const std::string& key, const std::string& kind,
                            const std::string& domain, uint64_t seed, int record_index,
                            const std::string& spoken) {
        auto it = table.find(key);
        if (it == table.end())
            throw std::invalid_argument("no templates for " + kind + " '" + key + "'");
        uint64_t h = fnv1a(domain + "|" + key + "|" + std::to_string(record_index)) ^ seed;
        const std::string& tmpl = it->second[size_t(h % it->second.size())];
        return replace_all(tmpl, "{domain}", spoken);
    }
};

class ExternalTextBackend : public TextGenBackend {
public:
    std::string name() const override { return "external"; }
    bool deterministic() const override { return false; }
    std::pair<std::string, std::string> dialogue(const std::string&, const std::string&,
                                                 const std::string&, uint64_t,
                                                 int) const override {
        throw std::runtime_error("external text backend needs a network service; "
                                 "use backend 'synthetic' for offline runs");
    }
};

}  // namespace

std::unique_ptr<TextGenBackend> make_text_backend(const std::string& name, const RunConfig&) {
    if (name == "synthetic") return std::make_unique<SyntheticTextBackend>();
    if (name == "external") return std::make_unique<ExternalTextBackend>();
    throw std::invalid_argument("unknown text backend '" + name + "'");
}

// ---- waveform rendering ---------------------------------------------------------

Waveform render_speech(const std::vector<int>& tokens, const FSQConfig& fsq, int emotion_idx,
                       int speaker_idx, int sample_rate, int chunk) {
    const int max_emotions = int((bands::kSpeakerBase - bands::kEmotionBase) / bands::kStep);
    if (emotion_idx < 0 || emotion_idx >= max_emotions)
        throw std::invalid_argument("emotion index " + std::to_string(emotion_idx) +
                                    " outside the emotion carrier band (max " +
                                    std::to_string(max_emotions - 1) + ")");
    const double nyquist = sample_rate / 2.0;
    const double spk_freq = bands::kSpeakerBase + bands::kSpeakerStep * speaker_idx;
    if (speaker_idx < 0 || spk_freq >= nyquist)
        throw std::invalid_argument("speaker index " + std::to_string(speaker_idx) +
                                    " outside the speaker carrier band");
    Waveform w = synthesize_waveform_stub(tokens, fsq, sample_rate, chunk);
    const double emo_freq = bands::kEmotionBase + bands::kStep * emotion_idx;
    const int eos = speech_eos_id(fsq);
    const double two_pi = 6.283185307179586476925286766559;
    for (size_t ti = 0; ti < tokens.size(); ++ti) {
        if (tokens[ti] == eos) continue;  // terminal silence carries nothing
        double* dst = w.samples.data() + ti * size_t(chunk);
        for (int i = 0; i < chunk; ++i) {
            dst[i] += bands::kEmotionAmp * std::sin(two_pi * emo_freq * i / sample_rate);
            dst[i] += bands::kSpeakerAmp * std::sin(two_pi * spk_freq * i / sample_rate);
        }
    }
    return w;
}

// ---- TTS backends ------------------------------------------------------------

namespace {

class SyntheticTTS : public TTSBackend {
public:
    explicit SyntheticTTS(const RunConfig& cfg)
        : fsq_(fsq_config_from(cfg)),
          sample_rate_(cfg.get_int("speech.sample_rate")),
          chunk_(cfg.get_int("speech.chunk_samples")) {}
    std::string name() const override { return "synthetic"; }
    bool deterministic() const override { return true; }
    Waveform synthesize(const std::vector<int>& tokens, int emotion_idx,
                        int speaker_idx) const override {
        return render_speech(tokens, fsq_, emotion_idx, speaker_idx, sample_rate_, chunk_);
    }

private:
    FSQConfig fsq_;
    int sample_rate_;
    int chunk_;
};

class ExternalTTS : public TTSBackend {
public:
    std::string name() const override { return "external"; }
    bool deterministic() const override { return false; }
    Waveform synthesize(const std::vector<int>&, int, int) const override {
        throw std::runtime_error("external speech backend needs a network service; "
                                 "use backend 'synthetic' for offline runs");
    }
};

}  // namespace

std::unique_ptr<TTSBackend> make_tts_backend(const std::string& name, const RunConfig& cfg) {
    if (name == "synthetic") return std::make_unique<SyntheticTTS>(cfg);
    if (name == "external") return std::make_unique<ExternalTTS>();
    throw std::invalid_argument("unknown speech backend '" + name + "'");
}

// ---- emotion classifiers ----------------------------------------------------------

std::pair<std::string, double> EmotionClassifier::classify(const Waveform& w) const {
    std::vector<double> s = scores(w);
    size_t best = 0;
    for (size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[best]) best = i;
    return {labels()[best], s[best]};
}

double EmotionClassifier::label_confidence(const Waveform& w, const std::string& label) const {
    return scores(w)[size_t(label_index(labels(), label))];
}

namespace {

class SyntheticClassifier : public EmotionClassifier {
public:
    explicit SyntheticClassifier(const RunConfig& cfg) : labels_(union_emotion_labels(cfg)) {}
    std::string name() const override { return "synthetic"; }
    const std::vector<std::string>& labels() const override { return labels_; }
    std::vector<double> scores(const Waveform& w) const override {
        validate_waveform(w);
        std::vector<double> s(labels_.size());
        double total = 0.0;
        for (size_t i = 0; i < labels_.size(); ++i) {
            s[i] = goertzel_amp(w.samples.data(), int(w.samples.size()),
                                bands::kEmotionBase + bands::kStep * double(i),
                                double(w.sample_rate));
            total += s[i];
        }
        if (total < 1e-12) return std::vector<double>(labels_.size(), 1.0 / double(labels_.size()));
        for (double& v : s) v /= total;
        return s;
    }

private:
    std::vector<std::string> labels_;
};

// Deterministically misreports roughly one waveform in ten (keyed by the
// sample bytes) so retention under filtering can be tested.
class FlipMockClassifier : public EmotionClassifier {
public:
    FlipMockClassifier(const RunConfig& cfg, uint64_t seed) : inner_(cfg), seed_(seed) {}
    std::string name() const override { return "flipmock"; }
    const std::vector<std::string>& labels() const override { return inner_.labels(); }
    std::vector<double> scores(const Waveform& w) const override {
        std::vector<double> s = inner_.scores(w);
        std::string bytes(reinterpret_cast<const char*>(w.samples.data()),
                          w.samples.size() * sizeof(double));
        if ((fnv1a(bytes) ^ seed_) % 10 == 0)
            std::rotate(s.rbegin(), s.rbegin() + 1, s.rend());  // shift mass to the next label
        return s;
    }

private:
    SyntheticClassifier inner_;
    uint64_t seed_;
};

}  // namespace

std::unique_ptr<EmotionClassifier> make_classifier(const std::string& name, const RunConfig& cfg,
                                                   uint64_t seed) {
    if (name == "synthetic") return std::make_unique<SyntheticClassifier>(cfg);
    if (name == "flipmock") return std::make_unique<FlipMockClassifier>(cfg, seed);
    throw std::invalid_argument("unknown classifier backend '" + name + "'");
}

// ---- pipeline stages ------------------------------------------------------------------

static std::string record_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "d%05d", index);
    return buf;
}

std::vector<DialogueRecord> generate_dialogues(const RunConfig& cfg, int n, uint64_t seed,
                                               const TextGenBackend& backend,
                                               std::vector<GenFailure>* failures) {
    if (n < 1) throw std::invalid_argument("dialogue count must be at least 1");
    const std::vector<std::string> domains = cfg.get_str_list("datagen.domains");
    const std::vector<std::string> emotions = cfg.get_str_list("labels.query");
    if (domains.empty()) throw std::invalid_argument("datagen.domains is empty");
    if (emotions.empty()) throw std::invalid_argument("labels.query is empty");
    for (const std::string& e : emotions) response_style_for(cfg, e);  // fail fast on gaps

    std::vector<DialogueRecord> records;
    records.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        DialogueRecord rec;
        rec.id = record_id(i);
        rec.domain = domains[size_t(i) % domains.size()];
        rec.emotion_label = emotions[size_t(i) % emotions.size()];
        try {
            auto [q, r] = backend.dialogue(rec.domain, rec.emotion_label,
                                           response_style_for(cfg, rec.emotion_label), seed, i);
            rec.query_text = sanitize_speech_text(q);
            rec.response_text = sanitize_speech_text(r);
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            if (failures) failures->push_back({rec.id, e.what()});
        }
    }
    return records;
}

std::vector<DialogueRecord> synthesize_speech(const std::vector<DialogueRecord>& records,
                                              const SpeakerPool& pool, const RunConfig& cfg,
                                              const TTSBackend& tts, const std::string& out_dir,
                                              std::vector<GenFailure>* failures) {
    if (pool.speakers.empty()) throw std::invalid_argument("speaker pool is empty");
    if (out_dir.empty()) throw std::invalid_argument("output directory is empty");
    std::filesystem::create_directories(out_dir);
    const FSQConfig fsq = fsq_config_from(cfg);
    const std::vector<std::string> labels = union_emotion_labels(cfg);

    std::vector<DialogueRecord> out;
    out.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        DialogueRecord rec = records[i];
        const Speaker& spk = pool.speakers[i % pool.speakers.size()];
        try {
            const int q_emo = label_index(labels, rec.emotion_label);
            const int r_emo = label_index(labels, response_style_for(cfg, rec.emotion_label));
            std::vector<int> q_tokens = text_to_speech_tokens(rec.query_text, q_emo, fsq);
            std::vector<int> r_tokens = text_to_speech_tokens(rec.response_text, r_emo, fsq);
            rec.speaker_id = spk.id;
            rec.query_audio_path = rec.id + "_q.wav";
            rec.response_audio_path = rec.id + "_r.wav";
            rec.speech_token_path = rec.id + "_tokens.txt";
            write_wav(out_dir + "/" + rec.query_audio_path,
                      tts.synthesize(q_tokens, q_emo, spk.index));
            write_wav(out_dir + "/" + rec.response_audio_path,
                      tts.synthesize(r_tokens, r_emo, spk.index));
            write_token_file(out_dir + "/" + rec.speech_token_path, {r_tokens});
            out.push_back(std::move(rec));
        } catch (const std::exception& e) {
            if (failures) failures->push_back({records[i].id, e.what()});
        }
    }
    return out;
}

std::vector<DialogueRecord> filter_by_emotion(const std::vector<DialogueRecord>& records,
                                              const EmotionClassifier& classifier,
                                              double threshold, const std::string& base_dir) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw std::invalid_argument("filter threshold must lie in [0, 1]");
    std::vector<DialogueRecord> kept;
    kept.reserve(records.size());
    for (const DialogueRecord& rec : records) {
        Waveform w = read_wav(resolve_path(base_dir, rec.query_audio_path));
        if (classifier.label_confidence(w, rec.emotion_label) >= threshold) kept.push_back(rec);
    }
    return kept;
}

// ---- manifest -----------------------------------------------------------------

static std::vector<std::string> record_fields(const DialogueRecord& r) {
    return {r.id,         r.domain,           r.emotion_label,
            r.speaker_id, r.query_text,       r.response_text,
            r.query_audio_path, r.response_audio_path, r.speech_token_path};
}

void write_manifest(const std::vector<DialogueRecord>& records, const std::string& path) {
    std::string text;
    std::map<std::string, bool> seen;
    for (const DialogueRecord& r : records) {
        if (r.id.empty()) throw std::invalid_argument("manifest record with empty id");
        if (seen.count(r.id))
            throw std::invalid_argument("duplicate record id '" + r.id + "' in manifest");
        seen[r.id] = true;
        std::vector<std::string> fields = record_fields(r);
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) text += '\t';
            text += escape_field(fields[i]);
        }
        text += '\n';
    }
    write_text_file(path, text);
}

std::vector<DialogueRecord> read_manifest(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<DialogueRecord> records;
    std::map<std::string, int> seen;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;

        std::vector<std::string> fields;
        size_t f = 0;
        while (true) {
            size_t tab = line.find('\t', f);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(f));
                break;
            }
            fields.push_back(line.substr(f, tab - f));
            f = tab + 1;
        }
        if (fields.size() != 9)
            throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                     ": expected 9 fields, got " +
                                     std::to_string(fields.size()));
        for (std::string& s : fields) s = unescape_field(s);
        if (fields[0].empty())
            throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                     ": empty record id");
        if (seen.count(fields[0]))
            throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                     ": duplicate record id '" + fields[0] + "' (first on line " +
                                     std::to_string(seen[fields[0]]) + ")");
        seen[fields[0]] = line_no;
        DialogueRecord r;
        r.id = fields[0];
        r.domain = fields[1];
        r.emotion_label = fields[2];
        r.speaker_id = fields[3];
        r.query_text = fields[4];
        r.response_text = fields[5];
        r.query_audio_path = fields[6];
        r.response_audio_path = fields[7];
        r.speech_token_path = fields[8];
        records.push_back(std::move(r));
    }
    return records;
}

// ---- orchestration and loading ------------------------------------------------------

DatagenResult run_datagen(const RunConfig& cfg, const std::string& out_dir) {
    const int n = cfg.get_int("datagen.n");
    const uint64_t seed = uint64_t(cfg.get_int("datagen.seed"));
    const double threshold = cfg.get_double("datagen.threshold");
    auto text = make_text_backend(cfg.get("datagen.text_backend"), cfg);
    auto tts = make_tts_backend(cfg.get("datagen.tts_backend"), cfg);
    auto clf = make_classifier(cfg.get("datagen.classifier_backend"), cfg, seed);
    SpeakerPool pool = make_speaker_pool(cfg.get_int("datagen.speakers"));

    DatagenResult result;
    std::vector<DialogueRecord> texts = generate_dialogues(cfg, n, seed, *text, &result.failures);
    std::vector<DialogueRecord> synthesized =
        synthesize_speech(texts, pool, cfg, *tts, out_dir, &result.failures);
    result.generated = int(synthesized.size());
    result.records = filter_by_emotion(synthesized, *clf, threshold, out_dir);
    result.filtered_out = result.generated - int(result.records.size());
    result.manifest_path = out_dir + "/manifest.tsv";
    write_manifest(result.records, result.manifest_path);
    return result;
}

std::string resolve_path(const std::string& base_dir, const std::string& rel) {
    if (rel.empty() || base_dir.empty() || rel.front() == '/') return rel;
    return base_dir + "/" + rel;
}

TrainExample load_train_example(const DialogueRecord& rec, const std::string& base_dir) {
    try {
        TrainExample ex;
        ex.id = rec.id;
        ex.query_audio = read_wav(resolve_path(base_dir, rec.query_audio_path));
        ex.response_audio = read_wav(resolve_path(base_dir, rec.response_audio_path));
        ex.response_text = rec.response_text;
        std::vector<std::vector<int>> utts =
            read_token_file(resolve_path(base_dir, rec.speech_token_path));
        if (utts.size() != 1)
            throw std::runtime_error("token file holds " + std::to_string(utts.size()) +
                                     " utterances, expected 1");
        ex.speech_tokens = std::move(utts[0]);
        return ex;
    } catch (const std::exception& e) {
        throw std::runtime_error("example '" + rec.id + "': " + e.what());
    }
}

std::vector<TrainExample> load_train_examples(const std::vector<DialogueRecord>& records,
                                              const std::string& base_dir) {
    std::vector<TrainExample> out;
    out.reserve(records.size());
    for (const DialogueRecord& r : records) out.push_back(load_train_example(r, base_dir));
    return out;
}

}  // namespace emomni
