// End-to-end inference path: audio in, reply text + speech tokens + waveform out.
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "emomni/datapipe.hpp"
#include "emomni/evaluation.hpp"
#include "emomni/inference.hpp"
#include "emomni/io.hpp"

using namespace emomni;

namespace {

RunConfig tiny_infer_cfg() {
    RunConfig cfg;
    cfg.set("dims.d_model", "16");
    cfg.set("backbone.layers", "1");
    cfg.set("backbone.heads", "2");
    cfg.set("backbone.mlp_mult", "2");
    cfg.set("backbone.max_len", "24");
    cfg.set("backbone.max_prefix", "8");
    cfg.set("decoder.layers", "1");
    cfg.set("decoder.heads", "2");
    cfg.set("decoder.mlp_mult", "2");
    cfg.set("emotion_head.hidden", "16");
    cfg.set("lora.rank", "2");
    cfg.set("speech.max_ratio", "2");
    return cfg;
}

Waveform query_audio(const Model& m, const std::string& text) {
    return render_speech(text_to_speech_tokens(text, 3, m.decoder.fsq), m.decoder.fsq,
                         /*emotion_idx=*/4, /*speaker_idx=*/2);
}

bool same_result(const InferenceResult& a, const InferenceResult& b) {
    return a.response_text == b.response_text && a.response_ids == b.response_ids &&
           a.speech_tokens == b.speech_tokens && a.waveform.samples == b.waveform.samples &&
           mat_bitwise_equal(a.emotion_pred, b.emotion_pred);
}

}  // namespace

TEST_CASE("gate usage follows the checkpoint stage") {
    CHECK(checkpoint_uses_gate(Stage::S2_2));
    CHECK_FALSE(checkpoint_uses_gate(Stage::S2_1));
    CHECK_THROWS_WITH_AS(checkpoint_uses_gate(Stage::S1),
                         "a stage s1 checkpoint cannot drive speech generation; "
                         "train stage s2.1 or s2.2 first",
                         std::invalid_argument);
}

TEST_CASE("greedy inference is deterministic and internally consistent") {
    Model m = build_model(tiny_infer_cfg());
    const Waveform q = query_audio(m, "how are you");

    InferenceResult a = run_inference(m, q);
    InferenceResult b = run_inference(m, q);
    CHECK(same_result(a, b));

    // text side: stripped ids reproduce the text, end marker never leaks out
    CHECK(a.response_text == ids_to_text(a.response_ids));
    for (int id : a.response_ids) CHECK(id != kEosId);
    CHECK(a.emotion_pred.rows == int(a.response_ids.size()) + 1);
    CHECK(a.emotion_pred.cols == m.cfg.get_int("dims.d_emo"));

    // speech side: a legal token sequence whose stub waveform reads back exactly
    CHECK(!a.speech_tokens.empty());
    CHECK_NOTHROW(validate_speech_tokens(a.speech_tokens, m.decoder.fsq));
    const int chunk = m.cfg.get_int("speech.chunk_samples");
    CHECK(a.waveform.samples.size() == a.speech_tokens.size() * size_t(chunk));
    CHECK(a.waveform.sample_rate == m.cfg.get_int("speech.sample_rate"));
    CHECK(stub_extract_tokens(a.waveform, m.decoder.fsq, chunk) == a.speech_tokens);
}

TEST_CASE("gate fusion and gate bypass both decode but disagree") {
    Model m = build_model(tiny_infer_cfg());
    const Waveform q = query_audio(m, "i feel stuck");

    InferOptions with_gate;      // defaults: use_gate = true
    InferOptions without_gate;
    without_gate.use_gate = false;

    InferenceResult g1 = run_inference(m, q, with_gate);
    InferenceResult g2 = run_inference(m, q, with_gate);
    InferenceResult n1 = run_inference(m, q, without_gate);
    InferenceResult n2 = run_inference(m, q, without_gate);
    CHECK(same_result(g1, g2));
    CHECK(same_result(n1, n2));

    // the text path is identical; only the speech conditioning changes
    CHECK(g1.response_text == n1.response_text);
    CHECK(mat_bitwise_equal(g1.emotion_pred, n1.emotion_pred));
    CHECK(g1.waveform.samples != n1.waveform.samples);

    CHECK(stub_extract_tokens(g1.waveform, m.decoder.fsq) == g1.speech_tokens);
    CHECK(stub_extract_tokens(n1.waveform, m.decoder.fsq) == n1.speech_tokens);
}

TEST_CASE("sampled decoding is reproducible per seed") {
    Model m = build_model(tiny_infer_cfg());
    const Waveform q = query_audio(m, "tell me more");

    InferOptions opt;
    opt.text_mode = GenMode::Sampled;
    opt.speech_mode = GenMode::Sampled;
    opt.seed = 123;

    InferenceResult a = run_inference(m, q, opt);
    InferenceResult b = run_inference(m, q, opt);
    CHECK(same_result(a, b));

    opt.seed = 124;
    InferenceResult c = run_inference(m, q, opt);
    const bool differs = a.response_ids != c.response_ids || a.speech_tokens != c.speech_tokens;
    CHECK(differs);
}

TEST_CASE("text budget: capped by option, rejected when the prefix fills the context") {
    Model m = build_model(tiny_infer_cfg());
    const Waveform q = query_audio(m, "hello");

    InferOptions one;
    one.max_text_tokens = 1;
    CHECK(run_inference(m, q, one).response_ids.size() <= 1);

    InferOptions huge;
    huge.max_text_tokens = 1000000;  // clamped to the position budget, must not throw
    InferenceResult r = run_inference(m, q, huge);
    const Mat prefix = encode_query_prefix(m, q);
    CHECK(int(r.response_ids.size()) <= m.backbone.max_len - prefix.rows - 1);

    // a query so long that no text position is left
    RunConfig cramped = tiny_infer_cfg();
    cramped.set("backbone.max_len", "8");
    cramped.set("backbone.max_prefix", "16");
    Model small = build_model(cramped);
    Waveform long_q;
    long_q.samples.assign(40 * 320, 0.0);
    for (size_t i = 0; i < long_q.samples.size(); ++i)
        long_q.samples[i] = 0.1 * std::sin(2.0 * 3.14159265358979 * 500.0 * double(i) / 16000.0);
    CHECK_THROWS_WITH_AS(run_inference(small, long_q),
                         "query prefix of 8 rows leaves no room for text generation",
                         std::invalid_argument);
}

TEST_CASE("outputs file round trip and malformed lines") {
    const std::string dir = "/tmp/emomni_outputs_test";
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/outputs.tsv";

    std::vector<ModelOutput> outs;
    outs.push_back(ModelOutput{"d00000", "plain reply", {0, 5, 999, 1000}});
    outs.push_back(ModelOutput{"d00001", "tab\there\nand \\back", {}});
    outs.push_back(ModelOutput{"odd\tid", "", {7}});
    write_outputs_file(outs, path);

    std::vector<ModelOutput> back = read_outputs_file(path);
    REQUIRE(back.size() == outs.size());
    for (size_t i = 0; i < outs.size(); ++i) {
        CHECK(back[i].id == outs[i].id);
        CHECK(back[i].response_text == outs[i].response_text);
        CHECK(back[i].speech_tokens == outs[i].speech_tokens);
    }

    // writing is rejected outright for an unusable id
    std::vector<ModelOutput> unnamed{ModelOutput{"", "x", {}}};
    CHECK_THROWS_AS(write_outputs_file(unnamed, path), std::invalid_argument);

    // reading complains with the line number
    write_text_file(path, "a\tok\t1\nb\tmissing-tokens-field\n");
    CHECK_THROWS_WITH_AS(read_outputs_file(path),
                         "outputs line 2: expected 3 tab-separated fields", std::runtime_error);
    write_text_file(path, "a\tok\t1 2x3\n");
    CHECK_THROWS_WITH_AS(read_outputs_file(path), "outputs line 1: bad token id '2x3'",
                         std::runtime_error);
    write_text_file(path, "a\tok\t1\n\t\t2\n");
    CHECK_THROWS_WITH_AS(read_outputs_file(path), "outputs line 2: empty record id",
                         std::runtime_error);

    // blank lines are tolerated, trailing newline optional
    write_text_file(path, "\na\thi\t4 5\n\nb\tyo\t");
    back = read_outputs_file(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].speech_tokens == std::vector<int>{4, 5});
    CHECK(back[1].id == "b");
    CHECK(back[1].speech_tokens.empty());
}
