// emomni_main.cpp : command line entry point (datagen / train / infer / eval)
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emomni/datapipe.hpp"
#include "emomni/evaluation.hpp"
#include "emomni/inference.hpp"
#include "emomni/io.hpp"
#include "emomni/training.hpp"

using namespace emomni;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

std::string default_out_dir(const RunConfig& cfg) {
    const char* home = std::getenv("EMOMNI_HOME");
    const std::string base = (home && *home) ? home : ".";
    return base + "/" + cfg.get("paths.out_dir");
}

std::string stage_file_slug(Stage s) {
    switch (s) {
        case Stage::S1: return "s1";
        case Stage::S2_1: return "s2_1";
        case Stage::S2_2: return "s2_2";
    }
    return "unknown";
}

std::string checkpoint_path(const std::string& out_dir, Stage s) {
    return out_dir + "/" + stage_file_slug(s) + ".ckpt";
}

std::string manifest_base_dir(const std::string& manifest_path) {
    return std::filesystem::path(manifest_path).parent_path().string();
}

int cmd_datagen(const RunConfig& cfg, const std::string& out_dir) {
    const std::filesystem::path parent = std::filesystem::path(out_dir).parent_path();
    if (!parent.empty() && !std::filesystem::exists(parent)) {
        std::cerr << "error: output directory parent '" << parent.string()
                  << "' does not exist\n";
        return kExitError;
    }
    DatagenResult result = run_datagen(cfg, out_dir);
    for (const GenFailure& f : result.failures)
        std::cerr << "record " << f.id << ": " << f.error << "\n";
    std::cout << "generated=" << result.generated << " kept=" << result.records.size()
              << " filtered_out=" << result.filtered_out << " failures="
              << result.failures.size() << " manifest=" << result.manifest_path << "\n";
    return result.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir, const std::string& stage_str,
              const std::string& manifest_path, bool resume) {
    const Stage stage = stage_from_name(stage_str);
    const StageConfig scfg = stage_config_from(cfg, stage);
    std::vector<TrainExample> data =
        load_train_examples(read_manifest(manifest_path), manifest_base_dir(manifest_path));

    Model model = build_model(cfg);
    int start_step = 0;
    const std::string own_ckpt = checkpoint_path(out_dir, stage);
    if (resume) {
        if (!std::filesystem::exists(own_ckpt))
            throw std::runtime_error("--resume needs an existing checkpoint at " + own_ckpt);
        Checkpoint ck = load_checkpoint(own_ckpt);
        if (ck.stage != stage)
            throw std::runtime_error("checkpoint at " + own_ckpt + " records stage " +
                                     stage_name(ck.stage) + ", not " + stage_name(stage));
        apply_checkpoint(ck, model.params);
        start_step = int(ck.step);
        std::cout << "resuming stage " << stage_name(stage) << " at step " << start_step << "\n";
    } else if (stage != Stage::S1) {
        // stage ordering: each stage starts from its predecessor's checkpoint
        const Stage prev = stage == Stage::S2_1 ? Stage::S1 : Stage::S2_1;
        const std::string prev_path = checkpoint_path(out_dir, prev);
        if (!std::filesystem::exists(prev_path))
            throw std::runtime_error("stage " + stage_name(stage) + " needs the stage " +
                                     stage_name(prev) + " checkpoint at " + prev_path +
                                     "; run train --stage " + stage_name(prev) + " first");
        Checkpoint ck = load_checkpoint(prev_path);
        if (ck.stage != prev)
            throw std::runtime_error("checkpoint at " + prev_path + " records stage " +
                                     stage_name(ck.stage) + ", not " + stage_name(prev));
        apply_checkpoint(ck, model.params);
    }

    std::filesystem::create_directories(out_dir);
    const std::string log_path = out_dir + "/train_" + stage_file_slug(stage) + ".log";
    std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open log file " + log_path);

    StageResult result;
    switch (stage) {
        case Stage::S1: result = run_stage1(model, data, scfg, &log, start_step); break;
        case Stage::S2_1: result = run_stage2_1(model, data, scfg, &log, start_step); break;
        case Stage::S2_2: result = run_stage2_2(model, data, scfg, &log, start_step); break;
    }
    save_checkpoint(result.checkpoint, own_ckpt);
    std::cout << "stage " << stage_name(stage) << " done: steps=" << scfg.steps
              << (result.losses.empty()
                      ? std::string()
                      : " final_loss=" + std::to_string(result.losses.back()))
              << " checkpoint=" << own_ckpt << " log=" << log_path << "\n";
    return kExitOk;
}

int cmd_infer(const std::string& out_dir, const std::string& ckpt_path,
              const std::string& audio_path, const std::string& manifest_path, bool sampled,
              uint64_t seed) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    RunConfig model_cfg = load_config_text(ck.config_text);
    Model model = build_model(model_cfg);
    apply_checkpoint(ck, model.params);

    InferOptions opt;
    opt.use_gate = checkpoint_uses_gate(ck.stage);
    opt.text_mode = sampled ? GenMode::Sampled : GenMode::Greedy;
    opt.speech_mode = opt.text_mode;
    opt.seed = seed;

    std::filesystem::create_directories(out_dir);
    if (!audio_path.empty()) {
        InferenceResult r = run_inference(model, read_wav(audio_path), opt);
        write_text_file(out_dir + "/response.txt", r.response_text + "\n");
        write_token_file(out_dir + "/response_tokens.txt", {r.speech_tokens});
        write_wav(out_dir + "/response.wav", r.waveform);
        FeatureSequence emo;
        emo.frames = r.emotion_pred;
        emo.frame_rate = 1.0;  // one row per text position
        write_feature_dump(out_dir + "/emotion_pred.bin", emo);
        std::cout << r.response_text << "\n";
        return kExitOk;
    }

    std::vector<DialogueRecord> records = read_manifest(manifest_path);
    const std::string base = manifest_base_dir(manifest_path);
    std::vector<ModelOutput> outputs;
    int failed = 0;
    for (const DialogueRecord& rec : records) {
        try {
            InferenceResult r =
                run_inference(model, read_wav(resolve_path(base, rec.query_audio_path)), opt);
            outputs.push_back(ModelOutput{rec.id, r.response_text, r.speech_tokens});
            write_wav(out_dir + "/" + rec.id + "_gen.wav", r.waveform);
        } catch (const std::exception& e) {
            std::cerr << "record " << rec.id << ": " << e.what() << "\n";
            ++failed;
        }
    }
    const std::string outputs_path = out_dir + "/outputs.tsv";
    write_outputs_file(outputs, outputs_path);
    std::cout << "inferred=" << outputs.size() << " failed=" << failed
              << " outputs=" << outputs_path << "\n";
    return failed == 0 ? kExitOk : kExitPartial;
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir, const std::string& manifest_path,
             const std::string& outputs_path, const std::string& judge_name,
             std::string report_path) {
    std::vector<DialogueRecord> records = read_manifest(manifest_path);
    std::vector<ModelOutput> outputs = read_outputs_file(outputs_path);
    auto judge = make_judge(judge_name.empty() ? cfg.get("judge.backend") : judge_name, cfg);
    EvaluationReport rep = evaluate_corpus(records, outputs, *judge, cfg);

    if (report_path.empty()) {
        std::filesystem::create_directories(out_dir);
        report_path = out_dir + "/report.tsv";
    }
    write_text_file(report_path, report_to_text(rep));
    std::cout << "mean_wer_percent=" << rep.mean_wer * 100.0
              << " mean_emotion_score=" << rep.mean_score << " n=" << rep.n
              << " missing=" << rep.missing.size() << " unscored=" << rep.unscored.size()
              << " report=" << report_path << "\n";
    for (const std::string& id : rep.missing) std::cerr << "missing output: " << id << "\n";
    return (rep.missing.empty() && rep.unscored.empty()) ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emotion-aware speech assistant: data, training, inference, evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    app.add_option("--config", config_path, "config file (key = value lines over defaults)");
    app.add_option("--seed", seed, "override datagen.seed and train.seed");
    app.add_option("--out-dir", out_dir,
                   "output directory (default $EMOMNI_HOME/<paths.out_dir> or ./<paths.out_dir>)");

    int n = -1;
    double threshold = -1.0;
    CLI::App* dg = app.add_subcommand("datagen", "generate a synthetic dialogue corpus");
    dg->fallthrough();
    dg->add_option("--n", n, "number of dialogue pairs");
    dg->add_option("--threshold", threshold, "emotion filter confidence threshold in [0,1]");

    std::string stage, manifest;
    bool resume = false;
    CLI::App* tr = app.add_subcommand("train", "run one training stage");
    tr->fallthrough();
    tr->add_option("--stage", stage, "s1, s2.1 or s2.2")->required();
    tr->add_option("--manifest", manifest, "dataset manifest path")->required();
    tr->add_flag("--resume", resume, "continue this stage from its checkpoint");

    std::string ckpt, audio, infer_manifest;
    bool sampled = false;
    CLI::App* in = app.add_subcommand("infer", "generate a reply from query audio");
    in->fallthrough();
    in->add_option("--checkpoint", ckpt, "stage s2.1 or s2.2 checkpoint")->required();
    CLI::Option* in_audio = in->add_option("--audio", audio, "single query wav file");
    in->add_option("--manifest", infer_manifest, "run every query in a manifest")
        ->excludes(in_audio);
    in->add_flag("--sample", sampled, "sample instead of greedy decoding");

    std::string eval_manifest, outputs_path, judge_name, report_path;
    CLI::App* ev = app.add_subcommand("eval", "score model outputs against a manifest");
    ev->fallthrough();
    ev->add_option("--manifest", eval_manifest, "reference manifest path")->required();
    ev->add_option("--outputs", outputs_path, "model outputs file path")->required();
    ev->add_option("--judge", judge_name, "mock or external (default from config)");
    ev->add_option("--report", report_path, "report file path (default <out-dir>/report.tsv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitError;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig() : load_config_file(config_path);
        if (seed >= 0) {
            cfg.set("datagen.seed", std::to_string(seed));
            cfg.set("train.seed", std::to_string(seed));
        }
        if (n >= 0) cfg.set("datagen.n", std::to_string(n));
        if (threshold >= 0.0) cfg.set("datagen.threshold", std::to_string(threshold));
        if (out_dir.empty()) out_dir = default_out_dir(cfg);

        if (dg->parsed()) return cmd_datagen(cfg, out_dir);
        if (tr->parsed()) return cmd_train(cfg, out_dir, stage, manifest, resume);
        if (in->parsed()) {
            if (audio.empty() == infer_manifest.empty())
                throw std::invalid_argument("infer needs exactly one of --audio or --manifest");
            return cmd_infer(out_dir, ckpt, audio, infer_manifest, sampled,
                             seed >= 0 ? uint64_t(seed) : 0);
        }
        if (ev->parsed())
            return cmd_eval(cfg, out_dir, eval_manifest, outputs_path, judge_name, report_path);
        std::cerr << "error: no command given\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
