#include "emomni/features.hpp"

#include <cmath>
#include <stdexcept>

namespace emomni {

void validate_waveform(const Waveform& w) {
    if (w.sample_rate <= 0) throw std::invalid_argument("waveform: sample_rate must be positive");
    if (w.samples.empty()) throw std::invalid_argument("waveform: empty sample buffer");
    for (double s : w.samples)
        if (!std::isfinite(s)) throw std::invalid_argument("waveform: non-finite sample");
}

FusionParams fusion_init(int d_in, int d_model, uint64_t seed) {
    FusionParams p;
    p.w = mat_randn(d_in, d_model, std::sqrt(2.0 / double(d_in + d_model)), seed);
    p.b = Mat(1, d_model, 0.0);
    return p;
}

double goertzel_amp(const double* x, int n, double freq, double sample_rate) {
    if (n <= 0) return 0.0;
    const double w = 2.0 * 3.14159265358979323846 * freq / sample_rate;
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        s0 = x[i] + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double re = s1 - s2 * std::cos(w);
    const double im = s2 * std::sin(w);
    return 2.0 * std::sqrt(re * re + im * im) / double(n);
}

namespace {

struct HopStats {
    double rms = 0.0;
    double zcr = 0.0;
    double mean_abs = 0.0;
    double max_abs = 0.0;
};

HopStats hop_stats(const double* x, int n) {
    HopStats s;
    double e = 0.0;
    int crossings = 0;
    for (int i = 0; i < n; ++i) {
        e += x[i] * x[i];
        s.mean_abs += std::fabs(x[i]);
        s.max_abs = std::max(s.max_abs, std::fabs(x[i]));
        if (i > 0 && ((x[i - 1] < 0.0) != (x[i] < 0.0))) ++crossings;
    }
    s.rms = std::sqrt(e / double(n));
    s.mean_abs /= double(n);
    s.zcr = n > 1 ? double(crossings) / double(n - 1) : 0.0;
    return s;
}

double autocorr(const double* x, int n, int lag) {
    if (lag >= n) return 0.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) den += x[i] * x[i];
    if (den <= 0.0) return 0.0;
    for (int i = 0; i + lag < n; ++i) num += x[i] * x[i + lag];
    return num / den;
}

int hop_samples(const Waveform& w, double frame_rate) {
    const double hop = double(w.sample_rate) / frame_rate;
    const int h = int(hop + 0.5);
    if (h <= 0 || std::fabs(hop - h) > 1e-9)
        throw std::invalid_argument("encoder: frame rate must divide the sample rate");
    return h;
}

constexpr int kTokenBins = 8 + 5 + 5 + 5;  // default level plan per token digit
constexpr int kTokenBinLevels[4] = {8, 5, 5, 5};

// amplitudes of the 23 default token bins for one hop
void token_bin_amps(const double* x, int n, double sr, double* out) {
    int o = 0;
    for (int d = 0; d < 4; ++d)
        for (int l = 0; l < kTokenBinLevels[d]; ++l)
            out[o++] = goertzel_amp(x, n, bands::kTokenBase[d] + bands::kStep * l, sr);
}

}  // namespace

SyntheticSemanticEncoder::SyntheticSemanticEncoder(double frame_rate) : frame_rate_(frame_rate) {
    if (frame_rate <= 0.0) throw std::invalid_argument("encoder: frame rate must be positive");
}

int SyntheticSemanticEncoder::output_dim() const { return kTokenBins + 9; }

FeatureSequence SyntheticSemanticEncoder::encode(const Waveform& w) const {
    validate_waveform(w);
    const int hop = hop_samples(w, frame_rate_);
    const int n = int(w.samples.size());
    const int T = (n + hop - 1) / hop;
    Mat frames(T, output_dim(), 0.0);
    for (int t = 0; t < T; ++t) {
        const double* x = w.samples.data() + size_t(t) * hop;
        const int len = std::min(hop, n - t * hop);
        double* f = frames.row(t);
        token_bin_amps(x, len, double(w.sample_rate), f);
        const HopStats s = hop_stats(x, len);
        double total = 0.0;
        for (int i = 0; i < kTokenBins; ++i) total += f[i];
        f[kTokenBins + 0] = s.rms;
        f[kTokenBins + 1] = s.zcr;
        f[kTokenBins + 2] = std::log1p(total);
        f[kTokenBins + 3] = autocorr(x, len, 1);
        f[kTokenBins + 4] = autocorr(x, len, 2);
        f[kTokenBins + 5] = autocorr(x, len, 4);
        f[kTokenBins + 6] = autocorr(x, len, 8);
        f[kTokenBins + 7] = s.mean_abs;
        f[kTokenBins + 8] = s.max_abs;
    }
    return {std::move(frames), frame_rate_};
}

SyntheticEmotionEncoder::SyntheticEmotionEncoder(int n_label_bins, double frame_rate)
    : n_label_bins_(n_label_bins), frame_rate_(frame_rate) {
    if (n_label_bins <= 0) throw std::invalid_argument("encoder: need at least one label bin");
    if (frame_rate <= 0.0) throw std::invalid_argument("encoder: frame rate must be positive");
}

FeatureSequence SyntheticEmotionEncoder::encode(const Waveform& w) const {
    validate_waveform(w);
    const int hop = hop_samples(w, frame_rate_);
    const int n = int(w.samples.size());
    const int T = (n + hop - 1) / hop;
    Mat frames(T, output_dim(), 0.0);
    std::vector<double> tok(kTokenBins);
    for (int t = 0; t < T; ++t) {
        const double* x = w.samples.data() + size_t(t) * hop;
        const int len = std::min(hop, n - t * hop);
        double* f = frames.row(t);
        double label_total = 0.0;
        for (int i = 0; i < n_label_bins_; ++i) {
            f[i] = goertzel_amp(x, len, bands::kEmotionBase + bands::kStep * i, double(w.sample_rate));
            label_total += f[i];
        }
        token_bin_amps(x, len, double(w.sample_rate), tok.data());
        double token_total = 0.0;
        for (double a : tok) token_total += a;
        const HopStats s = hop_stats(x, len);
        f[n_label_bins_ + 0] = s.rms;
        f[n_label_bins_ + 1] = s.zcr;
        f[n_label_bins_ + 2] = std::log1p(label_total);
        f[n_label_bins_ + 3] = std::log1p(token_total);
        f[n_label_bins_ + 4] = 1.0;
    }
    return {std::move(frames), frame_rate_};
}

std::vector<std::string> union_emotion_labels(const RunConfig& cfg) {
    std::vector<std::string> out = cfg.get_str_list("labels.query");
    for (const std::string& s : cfg.get_str_list("labels.response")) {
        bool seen = false;
        for (const std::string& q : out) seen = seen || (q == s);
        if (!seen) out.push_back(s);
    }
    return out;
}

std::unique_ptr<EncoderInterface> make_encoder(const std::string& backend, bool semantic,
                                               const RunConfig& cfg) {
    const double rate = cfg.get_double("encoder.frame_rate");
    if (backend == "synthetic") {
        if (semantic) return std::make_unique<SyntheticSemanticEncoder>(rate);
        return std::make_unique<SyntheticEmotionEncoder>(int(union_emotion_labels(cfg).size()), rate);
    }
    throw std::invalid_argument("encoder: unknown backend '" + backend + "'");
}

FeatureSequence downsample(const FeatureSequence& seq, int k) {
    if (k <= 0) throw std::invalid_argument("downsample: k must be positive");
    const Mat& in = seq.frames;
    const int T = in.rows;
    const int out_T = (T + k - 1) / k;
    Mat out(out_T, in.cols, 0.0);
    for (int j = 0; j < out_T; ++j) {
        const int lo = j * k;
        const int hi = std::min(lo + k, T);
        double* o = out.row(j);
        for (int i = lo; i < hi; ++i) {
            const double* r = in.row(i);
            for (int c = 0; c < in.cols; ++c) o[c] += r[c];
        }
        const double inv = 1.0 / double(hi - lo);
        for (int c = 0; c < in.cols; ++c) o[c] *= inv;
    }
    return {std::move(out), seq.frame_rate / double(k)};
}

std::pair<FeatureSequence, FeatureSequence> align_streams(const FeatureSequence& sem,
                                                          const FeatureSequence& emo) {
    if (sem.frame_rate != emo.frame_rate)
        throw std::invalid_argument("align_streams: frame rate mismatch");
    const int diff = std::abs(sem.frames.rows - emo.frames.rows);
    if (diff > 2)
        throw std::invalid_argument("align_streams: stream lengths differ by " +
                                    std::to_string(diff) + " frames (limit 2)");
    const int L = std::min(sem.frames.rows, emo.frames.rows);
    auto take = [L](const FeatureSequence& s) {
        Mat m(L, s.frames.cols);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < s.frames.cols; ++j) m.at(i, j) = s.frames.at(i, j);
        return FeatureSequence{std::move(m), s.frame_rate};
    };
    return {take(sem), take(emo)};
}

int fuse_project_nodes(Tape& t, int sem, int emo, int w, int b) {
    return t.add_rowvec(t.matmul(t.concat_cols(sem, emo), w), b);
}

FeatureSequence fuse_project(const FeatureSequence& sem, const FeatureSequence& emo,
                             const FusionParams& p) {
    auto [s, e] = align_streams(sem, emo);
    if (s.frames.cols + e.frames.cols != p.w.rows)
        throw std::invalid_argument("fuse_project: projection rows != D_sem + D_emo");
    Tape t;
    int out = fuse_project_nodes(t, t.leaf(s.frames), t.leaf(e.frames), t.leaf(p.w), t.leaf(p.b));
    return {t.val(out), s.frame_rate};
}

}  // namespace emomni
