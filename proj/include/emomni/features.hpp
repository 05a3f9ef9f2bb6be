// features.hpp : waveform/feature types, synthetic encoders, downsampling, fusion
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emomni/autodiff.hpp"
#include "emomni/config.hpp"
#include "emomni/mat.hpp"

namespace emomni {

struct Waveform {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    int sample_rate = 16000;
};

// Throws invalid_argument on empty / non-finite samples or bad rate.
void validate_waveform(const Waveform& w);

struct FeatureSequence {
    Mat frames;               // T x D
    double frame_rate = 0.0;  // Hz
};

struct FusionParams {
    Mat w;  // (D_sem + D_emo) x d_model
    Mat b;  // 1 x d_model
};

FusionParams fusion_init(int d_in, int d_model, uint64_t seed);

// ---- frequency plan ------------------------------------------------------
// All synthetic audio is built from tones at multiples of 50 Hz, which are
// exact DFT bins of a 320-sample hop at 16 kHz. Disjoint bands carry the
// speech-token digits, the emotion label, and the speaker identity, so each
// can be read back independently of the others.
namespace bands {
inline constexpr double kTokenBase[4] = {500.0, 1500.0, 2500.0, 3300.0};
inline constexpr int kTokenMaxLevels[4] = {10, 10, 8, 10};  // keep bands disjoint
inline constexpr double kTokenAmp[4] = {0.25, 0.20, 0.15, 0.12};
inline constexpr double kEmotionBase = 4300.0;
inline constexpr double kEmotionAmp = 0.10;
inline constexpr double kSpeakerBase = 5500.0;
inline constexpr double kSpeakerStep = 50.0;
inline constexpr double kSpeakerAmp = 0.08;
inline constexpr double kStep = 100.0;
}  // namespace bands

// Normalized single-bin DFT amplitude (Goertzel): a pure tone A*sin(2*pi*f*t)
// spanning the window at an exact bin returns A.
double goertzel_amp(const double* x, int n, double freq, double sample_rate);

// ---- encoders ------------------------------------------------------------

// Frozen featurizer: deterministic, parameter-free from the trainer's view.
class EncoderInterface {
public:
    virtual ~EncoderInterface() = default;
    virtual std::string name() const = 0;
    virtual int output_dim() const = 0;
    virtual double output_frame_rate() const = 0;
    virtual FeatureSequence encode(const Waveform& w) const = 0;
};

// 32-dim per-hop featurizer: the 23 token-band bin amplitudes of the default
// 8/5/5/5 level plan plus rms / zero-crossing / band-energy / autocorrelation
// statistics.
class SyntheticSemanticEncoder : public EncoderInterface {
public:
    explicit SyntheticSemanticEncoder(double frame_rate = 50.0);
    std::string name() const override { return "synthetic"; }
    int output_dim() const override;
    double output_frame_rate() const override { return frame_rate_; }
    FeatureSequence encode(const Waveform& w) const override;

private:
    double frame_rate_;
};

// (n_label_bins + 5)-dim per-hop featurizer over the emotion carrier band.
class SyntheticEmotionEncoder : public EncoderInterface {
public:
    explicit SyntheticEmotionEncoder(int n_label_bins = 11, double frame_rate = 50.0);
    std::string name() const override { return "synthetic"; }
    int output_dim() const override { return n_label_bins_ + 5; }
    double output_frame_rate() const override { return frame_rate_; }
    FeatureSequence encode(const Waveform& w) const override;

private:
    int n_label_bins_;
    double frame_rate_;
};

// Query labels followed by response labels, duplicates removed (order kept).
// Indexes the emotion carrier bins used across the whole project.
std::vector<std::string> union_emotion_labels(const RunConfig& cfg);

// Factory for config key `encoder.semantic` / `encoder.emotion`.
std::unique_ptr<EncoderInterface> make_encoder(const std::string& backend, bool semantic,
                                               const RunConfig& cfg);

// ---- adapters ------------------------------------------------------------

// Mean pooling over non-overlapping windows of k frames; the last window may
// be shorter. Output length ceil(T/k), frame_rate divided by k.
FeatureSequence downsample(const FeatureSequence& seq, int k);

// Truncates both streams to the common length (difference must be <= 2) and
// checks the rates match. Throws on gross misalignment.
std::pair<FeatureSequence, FeatureSequence> align_streams(const FeatureSequence& sem,
                                                          const FeatureSequence& emo);

// Tape form of concat + affine projection; `sem`/`emo` nodes must already be
// aligned to equal lengths. Returns the H_speech node.
int fuse_project_nodes(Tape& t, int sem, int emo, int w, int b);

// Pure form (runs the same tape ops without backward).
FeatureSequence fuse_project(const FeatureSequence& sem, const FeatureSequence& emo,
                             const FusionParams& p);

}  // namespace emomni
