#include "emomni/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace emomni {

namespace {

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

bool ends_with(const std::string& s, const std::string& p) {
    return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

}  // namespace

// ---- stages -----------------------------------------------------------------

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::S1: return "s1";
        case Stage::S2_1: return "s2.1";
        case Stage::S2_2: return "s2.2";
    }
    return "?";
}

Stage stage_from_name(const std::string& s) {
    if (s == "s1") return Stage::S1;
    if (s == "s2.1") return Stage::S2_1;
    if (s == "s2.2") return Stage::S2_2;
    throw std::invalid_argument("unknown stage '" + s + "' (expected s1, s2.1 or s2.2)");
}

bool in_stage_partition(Stage s, const std::string& name) {
    const bool decoder_side = starts_with(name, "speech_decoder.") || starts_with(name, "adaln.");
    switch (s) {
        case Stage::S1:
            return starts_with(name, "fusion.") || name == "backbone.prefix_pos" ||
                   starts_with(name, "emotion_head.") ||
                   (starts_with(name, "backbone.") &&
                    (ends_with(name, ".lora_down") || ends_with(name, ".lora_up")));
        case Stage::S2_1: return decoder_side;
        case Stage::S2_2: return decoder_side || starts_with(name, "gate.");
    }
    return false;
}

TrainableFn stage_trainable(Stage s) {
    return [s](const std::string& name) { return in_stage_partition(s, name); };
}

StageConfig stage_config_from(const RunConfig& cfg, Stage s) {
    const std::string p = s == Stage::S1 ? "s1" : s == Stage::S2_1 ? "s2_1" : "s2_2";
    StageConfig c;
    c.stage = s;
    c.steps = cfg.get_int(p + ".steps");
    c.learning_rate = cfg.get_double(p + ".lr");
    c.batch_size = cfg.get_int(p + ".batch");
    c.seed = uint64_t(cfg.get_int("train.seed"));
    c.loss = emotion_loss_config_from(cfg);
    if (c.steps < 1) throw std::invalid_argument("stage config: steps must be >= 1");
    if (c.learning_rate <= 0)
        throw std::invalid_argument("stage config: learning_rate must be positive");
    if (c.batch_size < 1) throw std::invalid_argument("stage config: batch_size must be >= 1");
    return c;
}

// ---- checkpoints --------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'M', 'C', 'K'};
constexpr uint32_t kFormatVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct ByteReader {
    const std::string& data;
    const std::string& path;
    size_t pos = 0;

    void need(size_t n) {
        if (pos + n > data.size())
            throw std::runtime_error(path + ": truncated checkpoint");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = data.substr(pos, n);
        pos += n;
        return s;
    }
};

uint32_t stage_code(Stage s) {
    switch (s) {
        case Stage::S1: return 0;
        case Stage::S2_1: return 1;
        case Stage::S2_2: return 2;
    }
    return 0;
}

Stage stage_from_code(uint32_t c, const std::string& path) {
    switch (c) {
        case 0: return Stage::S1;
        case 1: return Stage::S2_1;
        case 2: return Stage::S2_2;
    }
    throw std::runtime_error(path + ": unknown stage code " + std::to_string(c));
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, stage_code(ck.stage));
    put_u64(out, uint64_t(ck.step));
    put_u64(out, ck.config_text.size());
    out += ck.config_text;
    const auto names = ck.params.names();
    put_u64(out, names.size());
    for (const auto& name : names) {
        const Mat& m = ck.params.get(name);
        put_u64(out, name.size());
        out += name;
        put_u32(out, uint32_t(m.rows));
        put_u32(out, uint32_t(m.cols));
        for (double v : m.data) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint file '" + path + "'");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw std::runtime_error("write failed for checkpoint file '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint file '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::string data = buf.str();

    ByteReader r{data, path};
    if (r.bytes(4) != std::string(kMagic, 4))
        throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
    const uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw std::runtime_error(path + ": checkpoint format version " + std::to_string(version) +
                                 " needs migration (this build reads version " +
                                 std::to_string(kFormatVersion) + ")");
    Checkpoint ck;
    ck.format_version = int(version);
    ck.stage = stage_from_code(r.u32(), path);
    ck.step = int64_t(r.u64());
    ck.config_text = r.bytes(r.u64());
    const uint64_t n = r.u64();
    for (uint64_t i = 0; i < n; ++i) {
        const std::string name = r.bytes(r.u64());
        const int rows = int(r.u32());
        const int cols = int(r.u32());
        if (rows < 0 || cols < 0 || double(rows) * cols > 1e9)
            throw std::runtime_error(path + ": implausible shape for parameter '" + name + "'");
        Mat m(rows, cols);
        for (auto& v : m.data) v = r.f64();
        if (ck.params.has(name))
            throw std::runtime_error(path + ": duplicate parameter '" + name + "'");
        ck.params.set(name, std::move(m));
    }
    if (r.pos != data.size()) throw std::runtime_error(path + ": trailing bytes after checkpoint");
    return ck;
}

void apply_checkpoint(const Checkpoint& ck, ParamStore& model) {
    for (const auto& name : ck.params.names())
        if (!model.has(name))
            throw std::invalid_argument("checkpoint parameter '" + name +
                                        "' does not exist in the model");
    for (const auto& name : model.names())
        if (!ck.params.has(name))
            throw std::invalid_argument("model parameter '" + name +
                                        "' is missing from the checkpoint");
    for (const auto& name : model.names()) {
        const Mat& src = ck.params.get(name);
        Mat& dst = model.get(name);
        if (!src.same_shape(dst))
            throw std::invalid_argument("checkpoint parameter '" + name + "' has shape " +
                                        std::to_string(src.rows) + "x" + std::to_string(src.cols) +
                                        ", model expects " + std::to_string(dst.rows) + "x" +
                                        std::to_string(dst.cols));
        dst = src;
    }
}

// ---- model assembly -------------------------------------------------------------

Model build_model(const RunConfig& cfg) {
    Model m;
    m.cfg = cfg;
    m.backbone = backbone_config_from(cfg);
    m.decoder = speech_decoder_config_from(cfg);
    m.loss = emotion_loss_config_from(cfg);
    m.k_sem = cfg.get_int("features.k_sem");
    m.k_emo = cfg.get_int("features.k_emo");
    if (m.k_sem < 1 || m.k_emo < 1)
        throw std::invalid_argument("model: downsampling factors must be >= 1");
    m.sem_enc = make_encoder(cfg.get("encoder.semantic"), true, cfg);
    m.emo_enc = make_encoder(cfg.get("encoder.emotion"), false, cfg);
    if (m.sem_enc->output_dim() != cfg.get_int("dims.d_sem"))
        throw std::invalid_argument("model: dims.d_sem does not match the semantic encoder (" +
                                    std::to_string(m.sem_enc->output_dim()) + ")");
    if (m.emo_enc->output_dim() != cfg.get_int("dims.d_emo"))
        throw std::invalid_argument("model: dims.d_emo does not match the emotion encoder (" +
                                    std::to_string(m.emo_enc->output_dim()) + ")");

    const uint64_t bb_seed = uint64_t(cfg.get_int("backbone.seed"));
    init_backbone(m.params, m.backbone, bb_seed);
    backbone_attach_lora(m.params, m.backbone, cfg.get_int("lora.rank"),
                         cfg.get_str_list("lora.targets"), bb_seed);

    const int d_model = m.backbone.t.d_model;
    const int d_e = m.emo_enc->output_dim();
    FusionParams fp = fusion_init(m.sem_enc->output_dim() + d_e, d_model,
                                  bb_seed ^ fnv1a("fusion"));
    m.params.set("fusion.w", fp.w);
    m.params.set("fusion.b", fp.b);
    init_emotion_head(m.params, d_model, cfg.get_int("emotion_head.hidden"), d_e,
                      uint64_t(cfg.get_int("emotion_head.seed")));
    init_speech_decoder(m.params, m.decoder, uint64_t(cfg.get_int("decoder.seed")));
    init_adaln(m.params, d_e, d_model);
    init_gate(m.params, d_model);
    return m;
}

Mat encode_query_prefix(const Model& m, const Waveform& query) {
    FeatureSequence sem = downsample(m.sem_enc->encode(query), m.k_sem);
    FeatureSequence emo = downsample(m.emo_enc->encode(query), m.k_emo);
    auto aligned = align_streams(sem, emo);
    FusionParams fp{m.params.get("fusion.w"), m.params.get("fusion.b")};
    return fuse_project(aligned.first, aligned.second, fp).frames;
}

Mat response_text_embeddings(const Model& m, const std::vector<int>& response_ids) {
    const Mat& table = m.params.get("backbone.tok_embed");
    Mat out(int(response_ids.size()) + 1, table.cols);
    auto copy_row = [&](int dst, int id) {
        if (id < 0 || id >= table.rows)
            throw std::out_of_range("response token id " + std::to_string(id) + " out of range");
        std::memcpy(out.row(dst), table.row(id), sizeof(double) * size_t(table.cols));
    };
    copy_row(0, kBosId);
    for (size_t i = 0; i < response_ids.size(); ++i) copy_row(int(i) + 1, response_ids[i]);
    return out;
}

// ---- batching ----------------------------------------------------------------------

int batch_index(uint64_t seed, long long pos, int n) {
    if (n < 1) throw std::invalid_argument("batch_index: dataset is empty");
    if (pos < 0) throw std::invalid_argument("batch_index: negative position");
    const long long epoch = pos / n;
    const int offset = int(pos % n);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * uint64_t(epoch + 1)));
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    return perm[offset];
}

// ---- stage runners -----------------------------------------------------------------

namespace {

// one example's frozen-encoder view for stage 1
struct PreparedS1 {
    std::vector<int> in_tokens;     // BOS + response byte ids
    std::vector<int> text_targets;  // response byte ids + EOS
    Mat sem, emo;                   // aligned downsampled query features
    Mat emo_targets;                // (len(in_tokens)) x D_e
};

// one example's fully frozen view for stage 2 (backbone and head fixed there)
struct PreparedS2 {
    Mat h_text;       // text-side decoder input rows
    Mat h_out;        // backbone hidden states at the same rows
    Mat emo_targets;  // teacher emotion rows
    Mat emo_pred;     // frozen-head prediction from h_out
    std::vector<int> speech_in;       // teacher-forced decoder input
    std::vector<int> speech_targets;  // speech_in shifted, EOS-terminated
};

[[noreturn]] void rethrow_with_id(const std::string& id, const std::exception& err) {
    throw std::runtime_error("example '" + id + "': " + err.what());
}

PreparedS1 prepare_s1(const Model& m, const TrainExample& ex) {
    try {
        FeatureSequence sem = downsample(m.sem_enc->encode(ex.query_audio), m.k_sem);
        FeatureSequence emo = downsample(m.emo_enc->encode(ex.query_audio), m.k_emo);
        auto aligned = align_streams(sem, emo);
        PreparedS1 p;
        p.sem = aligned.first.frames;
        p.emo = aligned.second.frames;
        std::vector<int> ids = text_to_ids(ex.response_text);
        if (ids.empty()) throw std::invalid_argument("response text is empty");
        p.in_tokens.push_back(kBosId);
        p.in_tokens.insert(p.in_tokens.end(), ids.begin(), ids.end());
        p.text_targets = ids;
        p.text_targets.push_back(kEosId);
        p.emo_targets =
            build_targets(m.emo_enc->encode(ex.response_audio), int(p.in_tokens.size())).features;
        return p;
    } catch (const std::exception& err) {
        rethrow_with_id(ex.id, err);
    }
}

PreparedS2 prepare_s2(Model& m, const TrainExample& ex) {
    try {
        std::vector<int> ids = text_to_ids(ex.response_text);
        if (ids.empty()) throw std::invalid_argument("response text is empty");
        std::vector<int> in_tokens;
        in_tokens.push_back(kBosId);
        in_tokens.insert(in_tokens.end(), ids.begin(), ids.end());

        PreparedS2 p;
        p.h_text = response_text_embeddings(m, ids);
        Mat prefix = encode_query_prefix(m, ex.query_audio);
        p.h_out = backbone_forward(m.params, m.backbone, prefix, in_tokens).first;
        p.emo_targets =
            build_targets(m.emo_enc->encode(ex.response_audio), int(in_tokens.size())).features;
        p.emo_pred = emotion_head_predict(m.params, p.h_out);

        if (ex.speech_tokens.empty()) throw std::invalid_argument("no speech tokens");
        validate_speech_tokens(ex.speech_tokens, m.decoder.fsq);
        p.speech_targets = ex.speech_tokens;
        const int eos = speech_eos_id(m.decoder.fsq);
        if (p.speech_targets.back() != eos) p.speech_targets.push_back(eos);
        p.speech_in.assign(p.speech_targets.begin(), p.speech_targets.end() - 1);
        if (p.h_text.rows + int(p.speech_in.size()) > m.decoder.max_len)
            throw std::invalid_argument("decoder capacity exceeded: " +
                                        std::to_string(p.h_text.rows + int(p.speech_in.size())) +
                                        " positions > max_len " +
                                        std::to_string(m.decoder.max_len));
        return p;
    } catch (const std::exception& err) {
        rethrow_with_id(ex.id, err);
    }
}

int s1_example_nodes(Tape& t, Model& m, const PreparedS1& p, const EmotionLossConfig& loss,
                     const TrainableFn& tr, int* emo_node) {
    int w = t.param(m.params, "fusion.w", tr("fusion.w"));
    int b = t.param(m.params, "fusion.b", tr("fusion.b"));
    int prefix = fuse_project_nodes(t, t.leaf(p.sem), t.leaf(p.emo), w, b);
    BackboneNodes bn = backbone_forward_nodes(t, m.params, m.backbone, prefix, p.in_tokens, tr);
    int xent = t.softmax_xent(bn.logits, p.text_targets);
    int pred = emotion_head_nodes(t, m.params, bn.hidden, tr);
    int emo = emotion_loss_nodes(t, pred, t.leaf(p.emo_targets), loss);
    *emo_node = emo;
    return t.add(xent, t.scale(emo, loss.lambda_emo));
}

int s2_example_nodes(Tape& t, Model& m, const PreparedS2& p, double adaln_eps, bool use_gate,
                     const TrainableFn& tr) {
    int gm = t.param(m.params, "adaln.gamma_map", tr("adaln.gamma_map"));
    int bm = t.param(m.params, "adaln.beta_map", tr("adaln.beta_map"));
    int text = t.leaf(p.h_text);
    int cond, fused;
    if (use_gate) {
        int gw = t.param(m.params, "gate.w", tr("gate.w"));
        int gb = t.param(m.params, "gate.b", tr("gate.b"));
        fused = gate_fusion_nodes(t, text, t.leaf(p.h_out), gw, gb);
        cond = t.leaf(p.emo_pred);
    } else {
        fused = text;
        cond = t.leaf(p.emo_targets);
    }
    int adapted = adaln_nodes(t, fused, cond, gm, bm, adaln_eps);
    int logits = decode_forward_nodes(t, m.params, m.decoder, adapted, p.speech_in, tr);
    return t.softmax_xent(logits, p.speech_targets);
}

void sgd_apply(Tape& t, ParamStore& ps, Stage stage, double lr) {
    for (const auto& entry : t.param_nodes()) {
        if (!in_stage_partition(stage, entry.first)) continue;
        Mat g = t.grad_of(entry.second);
        Mat& p = ps.get(entry.first);
        for (size_t i = 0; i < p.size(); ++i) p.data[i] -= lr * g.data[i];
    }
}

void check_finite(Stage stage, int step, double loss) {
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "stage " << stage_name(stage) << " step " << step << ": loss is not finite ("
            << loss << "); aborting";
        throw std::runtime_error(msg.str());
    }
}

Checkpoint snapshot(const Model& m, Stage stage, int64_t step) {
    Checkpoint ck;
    ck.stage = stage;
    ck.step = step;
    ck.config_text = m.cfg.to_text();
    ck.params = m.params;
    return ck;
}

void log_step(std::ostream* log, Stage stage, int step, double loss, const double* emo) {
    if (!log) return;
    *log << "step=" << step << " stage=" << stage_name(stage) << " loss=" << loss;
    if (emo) *log << " emo_loss=" << *emo;
    *log << "\n";
}

}  // namespace

double total_loss_stage1(const Model& m, const std::vector<TrainExample>& batch,
                         const StageConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("total_loss_stage1: empty batch");
    Model& mm = const_cast<Model&>(m);  // frozen tape run; nothing is written
    double sum = 0.0;
    for (const auto& ex : batch) {
        PreparedS1 p = prepare_s1(m, ex);
        Tape t;
        int emo = -1;
        sum += t.val(s1_example_nodes(t, mm, p, cfg.loss, all_frozen(), &emo)).at(0, 0);
    }
    return sum / double(batch.size());
}

StageResult run_stage1(Model& m, const std::vector<TrainExample>& data, const StageConfig& cfg,
                       std::ostream* log, int start_step) {
    if (cfg.stage != Stage::S1)
        throw std::invalid_argument("run_stage1: config names stage " + stage_name(cfg.stage));
    if (data.empty()) throw std::invalid_argument("stage s1: no training examples");
    std::vector<PreparedS1> prep;
    prep.reserve(data.size());
    for (const auto& ex : data) prep.push_back(prepare_s1(m, ex));

    const TrainableFn tr = stage_trainable(Stage::S1);
    StageResult res;
    for (int step = start_step + 1; step <= cfg.steps; ++step) {
        Tape t;
        int total = -1;
        double emo_sum = 0.0;
        std::vector<int> emo_nodes;
        for (int j = 0; j < cfg.batch_size; ++j) {
            const int idx =
                batch_index(cfg.seed, (long long)(step - 1) * cfg.batch_size + j, int(data.size()));
            int emo = -1;
            int one = s1_example_nodes(t, m, prep[idx], cfg.loss, tr, &emo);
            emo_nodes.push_back(emo);
            total = j == 0 ? one : t.add(total, one);
        }
        total = t.scale(total, 1.0 / cfg.batch_size);
        const double loss = t.val(total).at(0, 0);
        for (int e : emo_nodes) emo_sum += t.val(e).at(0, 0);
        const double emo_mean = emo_sum / cfg.batch_size;
        check_finite(Stage::S1, step, loss);
        t.backward(total);
        sgd_apply(t, m.params, Stage::S1, cfg.learning_rate);
        res.losses.push_back(loss);
        log_step(log, Stage::S1, step, loss, &emo_mean);
    }
    res.checkpoint = snapshot(m, Stage::S1, cfg.steps);
    return res;
}

namespace {

StageResult run_stage2_common(Model& m, const std::vector<TrainExample>& data,
                              const StageConfig& cfg, std::ostream* log, int start_step,
                              bool use_gate) {
    const Stage stage = use_gate ? Stage::S2_2 : Stage::S2_1;
    if (data.empty())
        throw std::invalid_argument("stage " + stage_name(stage) + ": no training examples");
    const double adaln_eps = m.cfg.get_double("adaln.eps");
    std::vector<PreparedS2> prep;
    prep.reserve(data.size());
    for (const auto& ex : data) prep.push_back(prepare_s2(m, ex));

    const TrainableFn tr = stage_trainable(stage);
    StageResult res;
    for (int step = start_step + 1; step <= cfg.steps; ++step) {
        Tape t;
        int total = -1;
        for (int j = 0; j < cfg.batch_size; ++j) {
            const int idx =
                batch_index(cfg.seed, (long long)(step - 1) * cfg.batch_size + j, int(data.size()));
            int one = s2_example_nodes(t, m, prep[idx], adaln_eps, use_gate, tr);
            total = j == 0 ? one : t.add(total, one);
        }
        total = t.scale(total, 1.0 / cfg.batch_size);
        const double loss = t.val(total).at(0, 0);
        check_finite(stage, step, loss);
        t.backward(total);
        sgd_apply(t, m.params, stage, cfg.learning_rate);
        res.losses.push_back(loss);
        log_step(log, stage, step, loss, nullptr);
    }
    res.checkpoint = snapshot(m, stage, cfg.steps);
    return res;
}

}  // namespace

StageResult run_stage2_1(Model& m, const std::vector<TrainExample>& data, const StageConfig& cfg,
                         std::ostream* log, int start_step) {
    if (cfg.stage != Stage::S2_1)
        throw std::invalid_argument("run_stage2_1: config names stage " + stage_name(cfg.stage));
    return run_stage2_common(m, data, cfg, log, start_step, false);
}

StageResult run_stage2_2(Model& m, const std::vector<TrainExample>& data, const StageConfig& cfg,
                         std::ostream* log, int start_step) {
    if (cfg.stage != Stage::S2_2)
        throw std::invalid_argument("run_stage2_2: config names stage " + stage_name(cfg.stage));
    return run_stage2_common(m, data, cfg, log, start_step, true);
}

}  // namespace emomni
