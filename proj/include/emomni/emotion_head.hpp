// emotion_head.hpp : window-averaged emotion targets, prediction head, loss
#pragma once

#include "emomni/features.hpp"
#include "emomni/transformer.hpp"

namespace emomni {

struct EmotionTarget {
    Mat features;  // L x D_e
    int window;    // w = floor(T / L)
};

// Splits T response frames into L windows: the first L-1 windows hold
// w = floor(T/L) frames each, the final window absorbs the remainder.
// Each target row is the mean of its window. Throws when T < L or L < 1.
EmotionTarget build_targets(const FeatureSequence& response_emo, int L);

struct EmotionLossConfig {
    double lambda_emo = 0.5;  // weight of the emotion loss in the total loss
    double alpha_cos = 0.5;   // weight of the cosine term inside the loss
    double eps = 1e-8;        // row-norm floor below which cosine terms are 0
};

EmotionLossConfig emotion_loss_config_from(const RunConfig& cfg);

// Creates `emotion_head.w1/b1/w2/b2`: d_model -> hidden -> D_e with a tanh
// between the two affine maps.
void init_emotion_head(ParamStore& ps, int d_model, int hidden, int d_e, uint64_t seed);

// Tape form; `hidden` is an L x d_model node, result is L x D_e.
int emotion_head_nodes(Tape& t, ParamStore& ps, int hidden, const TrainableFn& trainable);

// Pure form.
Mat emotion_head_predict(ParamStore& ps, const Mat& hidden);

// loss = MSE(pred, target) + alpha_cos * (1 - mean per-row cosine similarity).
// MSE averages over all L*D_e elements; rows with norm < eps contribute
// cosine 0. Returns a scalar node.
int emotion_loss_nodes(Tape& t, int pred, int target, const EmotionLossConfig& cfg);

// Pure form (same tape ops, no backward).
double emotion_loss(const Mat& pred, const Mat& target, const EmotionLossConfig& cfg);

}  // namespace emomni
