#include "emomni/emotion_head.hpp"

#include <cmath>
#include <stdexcept>

namespace emomni {

EmotionTarget build_targets(const FeatureSequence& response_emo, int L) {
    const Mat& f = response_emo.frames;
    const int T = f.rows;
    if (L < 1) throw std::invalid_argument("build_targets: L must be >= 1");
    if (T < L)
        throw std::invalid_argument("build_targets: " + std::to_string(T) +
                                    " frames cannot fill " + std::to_string(L) + " windows");
    const int w = T / L;
    EmotionTarget out;
    out.window = w;
    out.features = Mat(L, f.cols, 0.0);
    for (int j = 0; j < L; ++j) {
        const int lo = j * w;
        const int hi = j == L - 1 ? T : (j + 1) * w;  // final window takes the remainder
        double* o = out.features.row(j);
        for (int i = lo; i < hi; ++i) {
            const double* r = f.row(i);
            for (int c = 0; c < f.cols; ++c) o[c] += r[c];
        }
        const double inv = 1.0 / double(hi - lo);
        for (int c = 0; c < f.cols; ++c) o[c] *= inv;
    }
    return out;
}

EmotionLossConfig emotion_loss_config_from(const RunConfig& cfg) {
    EmotionLossConfig c;
    c.lambda_emo = cfg.get_double("loss.lambda_emo");
    c.alpha_cos = cfg.get_double("loss.alpha_cos");
    c.eps = cfg.get_double("loss.eps");
    if (c.lambda_emo < 0 || c.alpha_cos < 0 || c.eps <= 0)
        throw std::invalid_argument("emotion loss: weights must be >= 0 and eps > 0");
    return c;
}

void init_emotion_head(ParamStore& ps, int d_model, int hidden, int d_e, uint64_t seed) {
    if (d_model < 1 || hidden < 1 || d_e < 1)
        throw std::invalid_argument("emotion head: dimensions must be positive");
    const double s1 = std::sqrt(2.0 / double(d_model + hidden));
    const double s2 = std::sqrt(2.0 / double(hidden + d_e));
    ps.set("emotion_head.w1", mat_randn(d_model, hidden, s1, seed ^ fnv1a("emotion_head.w1")));
    ps.set("emotion_head.b1", Mat(1, hidden, 0.0));
    ps.set("emotion_head.w2", mat_randn(hidden, d_e, s2, seed ^ fnv1a("emotion_head.w2")));
    ps.set("emotion_head.b2", Mat(1, d_e, 0.0));
}

int emotion_head_nodes(Tape& t, ParamStore& ps, int hidden, const TrainableFn& trainable) {
    int w1 = t.param(ps, "emotion_head.w1", trainable("emotion_head.w1"));
    int b1 = t.param(ps, "emotion_head.b1", trainable("emotion_head.b1"));
    int w2 = t.param(ps, "emotion_head.w2", trainable("emotion_head.w2"));
    int b2 = t.param(ps, "emotion_head.b2", trainable("emotion_head.b2"));
    int mid = t.tanh_op(t.add_rowvec(t.matmul(hidden, w1), b1));
    return t.add_rowvec(t.matmul(mid, w2), b2);
}

Mat emotion_head_predict(ParamStore& ps, const Mat& hidden) {
    Tape t;
    return t.val(emotion_head_nodes(t, ps, t.leaf(hidden), all_frozen()));
}

int emotion_loss_nodes(Tape& t, int pred, int target, const EmotionLossConfig& cfg) {
    if (!t.val(pred).same_shape(t.val(target)))
        throw std::invalid_argument("emotion_loss: shape mismatch");
    int diff = t.sub(pred, target);
    int mse = t.mean_all(t.mul(diff, diff));
    int cos = t.row_cosine_mean(pred, target, cfg.eps);
    // mse + alpha * (1 - cos)
    return t.add(mse, t.scale(t.add_const(t.scale(cos, -1.0), 1.0), cfg.alpha_cos));
}

double emotion_loss(const Mat& pred, const Mat& target, const EmotionLossConfig& cfg) {
    Tape t;
    return t.val(emotion_loss_nodes(t, t.leaf(pred), t.leaf(target), cfg)).at(0, 0);
}

}  // namespace emomni
