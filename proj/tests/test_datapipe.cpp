// test_datapipe.cpp : speech alphabet, backends, rendering, filtering, manifests
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

#include "emomni/datapipe.hpp"
#include "emomni/io.hpp"

using namespace emomni;

namespace {

FSQConfig std_fsq() {
    FSQConfig f;
    f.levels = {8, 5, 5, 5};
    return f;
}

// Independent packing oracle: mixed-radix over (char/5, char%5, style%5, style/5).
int packed_id_oracle(int char_idx, int style_idx) {
    const int i0 = char_idx / 5, i1 = char_idx % 5;
    const int i2 = style_idx % 5, i3 = style_idx / 5;
    return ((i0 * 5 + i1) * 5 + i2) * 5 + i3;
}

std::string fresh_dir(const std::string& name) {
    std::string dir = "/tmp/emomni_dp_" + name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

bool same_file_bytes(const std::string& a, const std::string& b) {
    return read_text_file(a) == read_text_file(b);
}

bool records_equal(const DialogueRecord& a, const DialogueRecord& b) {
    return a.id == b.id && a.domain == b.domain && a.emotion_label == b.emotion_label &&
           a.speaker_id == b.speaker_id && a.query_text == b.query_text &&
           a.response_text == b.response_text && a.query_audio_path == b.query_audio_path &&
           a.response_audio_path == b.response_audio_path &&
           a.speech_token_path == b.speech_token_path;
}

// Shared small corpus with audio on disk, built once (synthesis is the slow part).
struct Corpus {
    RunConfig cfg;
    std::string dir;
    std::vector<DialogueRecord> records;  // synthesized, unfiltered
};

const Corpus& corpus200() {
    static Corpus c = [] {
        Corpus out;
        out.dir = fresh_dir("corpus200");
        auto text = make_text_backend("synthetic", out.cfg);
        auto tts = make_tts_backend("synthetic", out.cfg);
        std::vector<DialogueRecord> texts = generate_dialogues(out.cfg, 200, 7, *text);
        out.records = synthesize_speech(texts, make_speaker_pool(10), out.cfg, *tts, out.dir);
        return out;
    }();
    return c;
}

}  // namespace

TEST_CASE("speech alphabet: 32 distinct symbols, sanitizer maps into it") {
    const std::string& cs = speech_charset();
    CHECK(cs.size() == 32);
    CHECK(std::set<char>(cs.begin(), cs.end()).size() == 32);
    CHECK(charset_safe("hello, world! it's fine?"));
    CHECK_FALSE(charset_safe("Upper"));
    CHECK_FALSE(charset_safe("under_score"));
    CHECK(sanitize_speech_text("Hello, World_X;") == "hello, world x ");
    CHECK(charset_safe(sanitize_speech_text("any 13 Bytes \t at _all_ \xc3\xa9")));
}

TEST_CASE("token packing matches the mixed-radix oracle for every char and style") {
    const FSQConfig fsq = std_fsq();
    const std::string& cs = speech_charset();
    for (int ci = 0; ci < int(cs.size()); ++ci) {
        for (int style = 0; style < 25; ++style) {
            std::vector<int> toks = text_to_speech_tokens(std::string(1, cs[size_t(ci)]), style, fsq);
            REQUIRE(toks.size() == 2);
            CHECK(toks[0] == packed_id_oracle(ci, style));
            CHECK(toks[1] == speech_eos_id(fsq));
        }
    }
}

TEST_CASE("text <-> token round trip preserves text and style") {
    const FSQConfig fsq = std_fsq();
    const std::string text = "back off, sir! why?";
    for (int style : {0, 3, 11, 24}) {
        std::vector<int> toks = text_to_speech_tokens(text, style, fsq);
        CHECK(toks.size() == text.size() + 1);
        CHECK(speech_tokens_to_text(toks, fsq) == text);
        CHECK(speech_tokens_style(toks, fsq) == style);
    }
    // stops at end-of-speech; ignores anything after it
    std::vector<int> toks = text_to_speech_tokens("ab", 1, fsq);
    toks.push_back(packed_id_oracle(2, 1));
    CHECK(speech_tokens_to_text(toks, fsq) == "ab");
}

TEST_CASE("token text mapping edge cases") {
    const FSQConfig fsq = std_fsq();
    CHECK_THROWS_AS(text_to_speech_tokens("ok;", 0, fsq), std::invalid_argument);
    CHECK_THROWS_AS(text_to_speech_tokens("ok", 25, fsq), std::invalid_argument);
    CHECK_THROWS_AS(text_to_speech_tokens("ok", -1, fsq), std::invalid_argument);
    CHECK_THROWS_AS(char_style_features(32, 0, fsq), std::invalid_argument);
    CHECK_THROWS_AS(char_style_features(-1, 0, fsq), std::invalid_argument);
    // char coordinate 7*5+0=35 lies beyond the 32-symbol alphabet -> reads as space
    CHECK(speech_tokens_to_text({7 * 125, speech_eos_id(fsq)}, fsq) == " ");
    CHECK(speech_tokens_to_text({}, fsq) == "");
    CHECK(speech_tokens_style({speech_eos_id(fsq)}, fsq) == -1);
    // majority vote across mixed styles
    std::vector<int> mixed = {packed_id_oracle(0, 3), packed_id_oracle(1, 3),
                              packed_id_oracle(2, 4), speech_eos_id(fsq)};
    CHECK(speech_tokens_style(mixed, fsq) == 3);
}

TEST_CASE("speaker pool: even split, stable ids, band capacity enforced") {
    SpeakerPool pool = make_speaker_pool(10);
    REQUIRE(pool.speakers.size() == 10);
    int male = 0;
    for (const Speaker& s : pool.speakers) male += s.male ? 1 : 0;
    CHECK(male == 5);
    CHECK(pool.speakers[0].id == "m0");
    CHECK(pool.speakers[4].id == "m4");
    CHECK(pool.speakers[5].id == "f0");
    CHECK(pool.speakers[9].id == "f4");
    for (int i = 0; i < 10; ++i) CHECK(pool.speakers[size_t(i)].index == i);
    CHECK_THROWS_AS(make_speaker_pool(3), std::invalid_argument);
    CHECK_THROWS_AS(make_speaker_pool(0), std::invalid_argument);
    CHECK_THROWS_AS(make_speaker_pool(52), std::invalid_argument);
}

TEST_CASE("empathy table: defaults map each query emotion to its response style") {
    RunConfig cfg;
    auto m = empathy_map(cfg);
    CHECK(m.size() == 6);
    CHECK(m.at("happiness") == "cheerful");
    CHECK(m.at("sadness") == "comforting");
    CHECK(m.at("anger") == "calming");
    CHECK(m.at("anxiety") == "reassuring");
    CHECK(m.at("surprise") == "curious");
    CHECK(m.at("neutral") == "neutral");
    CHECK(response_style_for(cfg, "sadness") == "comforting");
    CHECK_THROWS_AS(response_style_for(cfg, "boredom"), std::invalid_argument);
}

TEST_CASE("synthetic text backend: deterministic, charset-safe, varied") {
    RunConfig cfg;
    auto backend = make_text_backend("synthetic", cfg);
    CHECK(backend->name() == "synthetic");
    CHECK(backend->deterministic());
    auto [q1, r1] = backend->dialogue("customer_service", "sadness", "comforting", 7, 3);
    auto [q2, r2] = backend->dialogue("customer_service", "sadness", "comforting", 7, 3);
    CHECK(q1 == q2);
    CHECK(r1 == r2);
    CHECK(charset_safe(q1));
    CHECK(charset_safe(r1));
    CHECK(q1.find("customer service") != std::string::npos);  // '_' spoken as space
    CHECK(r1.find("customer service") != std::string::npos);
    CHECK(q1 != r1);

    // seeded lexical variation: more than one rendering per (domain, emotion)
    std::set<std::string> variants;
    for (int i = 0; i < 12; ++i)
        variants.insert(backend->dialogue("travel", "anger", "calming", 7, i).first);
    CHECK(variants.size() >= 2);

    CHECK_THROWS_AS(make_text_backend("bogus", cfg), std::invalid_argument);
    auto ext = make_text_backend("external", cfg);
    CHECK_FALSE(ext->deterministic());
    CHECK_THROWS_AS(ext->dialogue("travel", "anger", "calming", 7, 0), std::runtime_error);
}

TEST_CASE("render_speech: carriers land on their bins, silence stays silent") {
    const FSQConfig fsq = std_fsq();
    std::vector<int> toks = text_to_speech_tokens("hi", 2, fsq);
    const int emo = 4, spk = 7;
    Waveform w = render_speech(toks, fsq, emo, spk);
    REQUIRE(w.samples.size() == 3 * 320);
    // final chunk is the end-of-speech silence, carriers excluded
    for (size_t i = 2 * 320; i < w.samples.size(); ++i) CHECK(w.samples[i] == 0.0);
    for (double s : w.samples) CHECK(std::abs(s) < 1.0);
    const double* chunk0 = w.samples.data();
    CHECK(goertzel_amp(chunk0, 320, bands::kEmotionBase + bands::kStep * emo, 16000) ==
          doctest::Approx(bands::kEmotionAmp).epsilon(1e-9));
    CHECK(goertzel_amp(chunk0, 320, bands::kSpeakerBase + bands::kSpeakerStep * spk, 16000) ==
          doctest::Approx(bands::kSpeakerAmp).epsilon(1e-9));
    CHECK(goertzel_amp(chunk0, 320, bands::kEmotionBase + bands::kStep * (emo + 1), 16000) ==
          doctest::Approx(0.0).epsilon(1e-9));
    // token band unharmed by the added carriers
    CHECK(stub_extract_tokens(w, fsq) == toks);

    CHECK_THROWS_AS(render_speech(toks, fsq, 12, 0), std::invalid_argument);
    CHECK_THROWS_AS(render_speech(toks, fsq, -1, 0), std::invalid_argument);
    CHECK_THROWS_AS(render_speech(toks, fsq, 0, 50), std::invalid_argument);
    CHECK_THROWS_AS(render_speech(toks, fsq, 0, -1), std::invalid_argument);
}

TEST_CASE("synthetic classifier reads every emotion carrier back") {
    RunConfig cfg;
    const FSQConfig fsq = std_fsq();
    auto clf = make_classifier("synthetic", cfg, 0);
    const std::vector<std::string>& labels = clf->labels();
    REQUIRE(labels.size() == 11);
    for (int e = 0; e < int(labels.size()); ++e) {
        Waveform w = render_speech(text_to_speech_tokens("test words", e, fsq), fsq, e, 3);
        auto [label, conf] = clf->classify(w);
        CHECK(label == labels[size_t(e)]);
        CHECK(conf > 0.9);
        CHECK(clf->label_confidence(w, labels[size_t(e)]) == doctest::Approx(conf));
    }
    // carrier-free audio scores uniformly
    Waveform silent = render_speech({speech_eos_id(fsq)}, fsq, 0, 0);
    std::vector<double> s = clf->scores(silent);
    for (double v : s) CHECK(v == doctest::Approx(1.0 / 11).epsilon(1e-9));
    CHECK_THROWS_AS(clf->label_confidence(silent, "boredom"), std::invalid_argument);
    CHECK_THROWS_AS(make_classifier("bogus", cfg, 0), std::invalid_argument);
}

TEST_CASE("generate_dialogues: deterministic and balanced within one") {
    RunConfig cfg;
    auto backend = make_text_backend("synthetic", cfg);
    std::vector<DialogueRecord> a = generate_dialogues(cfg, 40, 42, *backend);
    std::vector<DialogueRecord> b = generate_dialogues(cfg, 40, 42, *backend);
    REQUIRE(a.size() == 40);
    REQUIRE(b.size() == 40);
    for (size_t i = 0; i < a.size(); ++i) CHECK(records_equal(a[i], b[i]));

    std::map<std::string, int> by_domain, by_emotion;
    std::set<std::string> ids;
    for (const DialogueRecord& r : a) {
        by_domain[r.domain]++;
        by_emotion[r.emotion_label]++;
        ids.insert(r.id);
    }
    CHECK(ids.size() == 40);
    CHECK(a[0].id == "d00000");
    CHECK(a.back().id == "d00039");
    CHECK(by_domain.size() == 20);
    for (const auto& [d, n] : by_domain) CHECK(n == 2);  // 40 records over 20 domains
    int emo_min = 40, emo_max = 0;
    for (const auto& [e, n] : by_emotion) {
        emo_min = std::min(emo_min, n);
        emo_max = std::max(emo_max, n);
    }
    CHECK(emo_max - emo_min <= 1);

    std::vector<DialogueRecord> c = generate_dialogues(cfg, 40, 43, *backend);
    bool any_diff = false;
    for (size_t i = 0; i < c.size(); ++i) any_diff = any_diff || !records_equal(a[i], c[i]);
    CHECK(any_diff);  // seed reaches the text
    CHECK_THROWS_AS(generate_dialogues(cfg, 0, 42, *backend), std::invalid_argument);
}

namespace {
// Fails on one record to exercise the continue-and-report path.
class FlakyBackend : public TextGenBackend {
public:
    std::string name() const override { return "flaky"; }
    bool deterministic() const override { return true; }
    std::pair<std::string, std::string> dialogue(const std::string& domain,
                                                 const std::string& emotion, const std::string&,
                                                 uint64_t, int record_index) const override {
        if (record_index == 3) throw std::runtime_error("upstream service hiccup");
        return {"about " + domain, "regarding " + emotion};
    }
};
}  // namespace

TEST_CASE("generate_dialogues: backend failure skips the record and reports its id") {
    RunConfig cfg;
    FlakyBackend flaky;
    std::vector<GenFailure> failures;
    std::vector<DialogueRecord> recs = generate_dialogues(cfg, 10, 1, flaky, &failures);
    CHECK(recs.size() == 9);
    REQUIRE(failures.size() == 1);
    CHECK(failures[0].id == "d00003");
    CHECK(failures[0].error.find("hiccup") != std::string::npos);
    for (const DialogueRecord& r : recs) CHECK(r.id != "d00003");
}

TEST_CASE("synthesize_speech: files exist, speakers round-robin, reruns byte-identical") {
    RunConfig cfg;
    auto text = make_text_backend("synthetic", cfg);
    auto tts = make_tts_backend("synthetic", cfg);
    CHECK(tts->deterministic());
    SpeakerPool pool = make_speaker_pool(10);
    std::vector<DialogueRecord> texts = generate_dialogues(cfg, 103, 11, *text);

    std::string dir_a = fresh_dir("synth_a");
    std::string dir_b = fresh_dir("synth_b");
    std::vector<DialogueRecord> a = synthesize_speech(texts, pool, cfg, *tts, dir_a);
    std::vector<DialogueRecord> b = synthesize_speech(texts, pool, cfg, *tts, dir_b);
    REQUIRE(a.size() == 103);

    std::map<std::string, int> by_speaker;
    for (size_t i = 0; i < a.size(); ++i) {
        const DialogueRecord& r = a[i];
        by_speaker[r.speaker_id]++;
        CHECK(r.speaker_id == pool.speakers[i % 10].id);
        // stored relative to the output directory
        CHECK(r.query_audio_path.find('/') == std::string::npos);
        CHECK(std::filesystem::exists(dir_a + "/" + r.query_audio_path));
        CHECK(std::filesystem::exists(dir_a + "/" + r.response_audio_path));
        CHECK(std::filesystem::exists(dir_a + "/" + r.speech_token_path));
        CHECK(records_equal(r, b[i]));
        CHECK(same_file_bytes(dir_a + "/" + r.query_audio_path, dir_b + "/" + r.query_audio_path));
        CHECK(same_file_bytes(dir_a + "/" + r.response_audio_path,
                              dir_b + "/" + r.response_audio_path));
        CHECK(same_file_bytes(dir_a + "/" + r.speech_token_path,
                              dir_b + "/" + r.speech_token_path));
    }
    REQUIRE(by_speaker.size() == 10);
    int mn = 103, mx = 0;
    for (const auto& [s, n] : by_speaker) {
        mn = std::min(mn, n);
        mx = std::max(mx, n);
    }
    CHECK(mx - mn <= 1);  // 103 over 10 speakers: sevens of 10 and threes of 11

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("synthesized corpus: tokens round-trip and the classifier recovers labels") {
    const Corpus& c = corpus200();
    REQUIRE(c.records.size() == 200);
    const FSQConfig fsq = fsq_config_from(c.cfg);
    auto clf = make_classifier("synthetic", c.cfg, 0);
    auto emap = empathy_map(c.cfg);

    int correct_query = 0, correct_response = 0;
    for (const DialogueRecord& r : c.records) {
        // consistency loop: stored tokens -> text; response audio -> tokens
        std::vector<std::vector<int>> utts = read_token_file(c.dir + "/" + r.speech_token_path);
        REQUIRE(utts.size() == 1);
        CHECK(utts[0].back() == speech_eos_id(fsq));
        CHECK(speech_tokens_to_text(utts[0], fsq) == r.response_text);
        Waveform rw = read_wav(c.dir + "/" + r.response_audio_path);
        CHECK(stub_extract_tokens(rw, fsq) == utts[0]);

        Waveform qw = read_wav(c.dir + "/" + r.query_audio_path);
        if (clf->classify(qw).first == r.emotion_label) ++correct_query;
        if (clf->classify(rw).first == emap.at(r.emotion_label)) ++correct_response;
    }
    // emotion signatures are recoverable from both sides of the dialogue
    CHECK(correct_query >= 190);  // >= 0.95 accuracy
    CHECK(correct_response >= 190);
}

TEST_CASE("filter_by_emotion: thresholds, order, and flip-mock retention") {
    const Corpus& c = corpus200();
    auto clf = make_classifier("synthetic", c.cfg, 0);

    std::vector<DialogueRecord> all = filter_by_emotion(c.records, *clf, 0.0, c.dir);
    CHECK(all.size() == c.records.size());
    for (size_t i = 0; i < all.size(); ++i) CHECK(records_equal(all[i], c.records[i]));

    CHECK_THROWS_AS(filter_by_emotion(c.records, *clf, 1.5, c.dir), std::invalid_argument);
    CHECK_THROWS_AS(filter_by_emotion(c.records, *clf, -0.1, c.dir), std::invalid_argument);
    CHECK_THROWS_AS(filter_by_emotion(c.records, *clf, std::nan(""), c.dir),
                    std::invalid_argument);

    // a classifier that misreports ~10% of waveforms drops those records
    auto flip = make_classifier("flipmock", c.cfg, 7);
    CHECK(flip->labels() == clf->labels());
    std::vector<DialogueRecord> kept = filter_by_emotion(c.records, *flip, 0.5, c.dir);
    std::vector<DialogueRecord> kept2 = filter_by_emotion(c.records, *flip, 0.5, c.dir);
    CHECK(kept.size() == kept2.size());  // deterministic given (classifier seed, corpus)
    CHECK(kept.size() < c.records.size());
    CHECK(kept.size() >= 160);  // ~90% retention
    CHECK(kept.size() <= 198);
    // survivors keep their relative order and content
    size_t cursor = 0;
    for (const DialogueRecord& k : kept) {
        while (cursor < c.records.size() && c.records[cursor].id != k.id) ++cursor;
        REQUIRE(cursor < c.records.size());
        CHECK(records_equal(k, c.records[cursor]));
    }
    // a flipped record's own-label confidence collapses to near zero
    for (const DialogueRecord& r : c.records) {
        Waveform w = read_wav(c.dir + "/" + r.query_audio_path);
        double conf = flip->label_confidence(w, r.emotion_label);
        bool kept_it = std::any_of(kept.begin(), kept.end(),
                                   [&](const DialogueRecord& k) { return k.id == r.id; });
        CHECK(kept_it == (conf >= 0.5));
        if (!kept_it) CHECK(conf < 0.1);
    }
}

TEST_CASE("manifest: round trip, escaping, malformed lines") {
    std::string dir = fresh_dir("manifest");
    const Corpus& c = corpus200();
    std::string path = dir + "/manifest.tsv";
    write_manifest(c.records, path);

    std::string bytes = read_text_file(path);
    CHECK(std::count(bytes.begin(), bytes.end(), '\n') == 200);  // one line per record

    std::vector<DialogueRecord> back = read_manifest(path);
    REQUIRE(back.size() == c.records.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(records_equal(back[i], c.records[i]));
    std::string path2 = dir + "/manifest2.tsv";
    write_manifest(back, path2);
    CHECK(same_file_bytes(path, path2));

    // awkward field content survives the escaping
    DialogueRecord odd;
    odd.id = "odd1";
    odd.domain = "a\tb";
    odd.emotion_label = "c\nd";
    odd.speaker_id = "e\\f";
    odd.query_text = "tab\there";
    odd.response_text = "line\nbreak";
    odd.query_audio_path = "q.wav";
    odd.response_audio_path = "r.wav";
    odd.speech_token_path = "t.txt";
    write_manifest({odd}, path2);
    std::vector<DialogueRecord> odd_back = read_manifest(path2);
    REQUIRE(odd_back.size() == 1);
    CHECK(records_equal(odd_back[0], odd));

    write_text_file(path2, "only\tthree\tfields\n");
    CHECK_THROWS_WITH_AS(read_manifest(path2), doctest::Contains("line 1"), std::runtime_error);
    write_text_file(path2, "a\tb\tc\td\te\tf\tg\th\ti\nx\ty\n");
    CHECK_THROWS_WITH_AS(read_manifest(path2), doctest::Contains("line 2"), std::runtime_error);
    std::string dup = "a\tb\tc\td\te\tf\tg\th\ti\n";
    write_text_file(path2, dup + dup);
    CHECK_THROWS_WITH_AS(read_manifest(path2), doctest::Contains("duplicate record id 'a'"),
                         std::runtime_error);
    write_text_file(path2, "\tb\tc\td\te\tf\tg\th\ti\n");
    CHECK_THROWS_WITH_AS(read_manifest(path2), doctest::Contains("empty record id"),
                         std::runtime_error);
    std::vector<DialogueRecord> twice = {c.records[0], c.records[0]};
    CHECK_THROWS_WITH_AS(write_manifest(twice, path2), doctest::Contains("duplicate"),
                         std::invalid_argument);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run_datagen: end-to-end determinism and loadable examples") {
    RunConfig cfg;
    cfg.set("datagen.n", "12");
    std::string dir_a = fresh_dir("run_a");
    std::string dir_b = fresh_dir("run_b");
    DatagenResult ra = run_datagen(cfg, dir_a);
    DatagenResult rb = run_datagen(cfg, dir_b);

    CHECK(ra.generated == 12);
    CHECK(ra.filtered_out == 0);  // threshold defaults to 0
    CHECK(ra.failures.empty());
    REQUIRE(ra.records.size() == 12);
    CHECK(ra.manifest_path == dir_a + "/manifest.tsv");
    CHECK(same_file_bytes(ra.manifest_path, rb.manifest_path));  // path-free manifests
    for (const DialogueRecord& r : ra.records) {
        CHECK(same_file_bytes(dir_a + "/" + r.query_audio_path,
                              dir_b + "/" + r.query_audio_path));
        CHECK(same_file_bytes(dir_a + "/" + r.response_audio_path,
                              dir_b + "/" + r.response_audio_path));
        CHECK(same_file_bytes(dir_a + "/" + r.speech_token_path,
                              dir_b + "/" + r.speech_token_path));
    }

    std::vector<TrainExample> examples = load_train_examples(read_manifest(ra.manifest_path),
                                                             dir_a);
    REQUIRE(examples.size() == 12);
    const FSQConfig fsq = fsq_config_from(cfg);
    for (const TrainExample& ex : examples) {
        CHECK(!ex.response_text.empty());
        CHECK(ex.speech_tokens.back() == speech_eos_id(fsq));
        CHECK(ex.speech_tokens.size() == ex.response_text.size() + 1);
        CHECK(ex.query_audio.samples.size() % 320 == 0);
        CHECK(ex.response_audio.samples.size() == ex.speech_tokens.size() * 320);
    }

    DialogueRecord missing = ra.records[0];
    missing.query_audio_path = "nope.wav";
    CHECK_THROWS_WITH_AS(load_train_example(missing, dir_a), doctest::Contains("d00000"),
                         std::runtime_error);

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("run_datagen: flip-mock classifier prunes the misread records") {
    RunConfig cfg;
    cfg.set("datagen.n", "60");
    cfg.set("datagen.classifier_backend", "flipmock");
    cfg.set("datagen.threshold", "0.5");
    std::string dir = fresh_dir("run_flip");
    DatagenResult r = run_datagen(cfg, dir);
    CHECK(r.generated == 60);
    CHECK(r.filtered_out == r.generated - int(r.records.size()));
    CHECK(r.filtered_out >= 1);
    CHECK(r.filtered_out <= 20);
    CHECK(read_manifest(r.manifest_path).size() == r.records.size());
    std::filesystem::remove_all(dir);
}
