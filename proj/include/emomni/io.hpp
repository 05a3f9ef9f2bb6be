// io.hpp : wav / feature-dump / token-file persistence and field escaping
#pragma once

#include <string>
#include <vector>

#include "emomni/features.hpp"

namespace emomni {

// 16-bit PCM mono WAV. Samples are clamped to [-1,1] and scaled by 32767 on
// write; read divides by the same factor.
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

// Text header `EOF1 <T> <D> <frame_rate>` + row-major little-endian f32.
void write_feature_dump(const std::string& path, const FeatureSequence& seq);
FeatureSequence read_feature_dump(const std::string& path);

// One utterance per line, whitespace-separated decimal token ids.
void write_token_file(const std::string& path, const std::vector<std::vector<int>>& utterances);
std::vector<std::vector<int>> read_token_file(const std::string& path);

// Tab/newline/backslash escaping for tab-separated record lines.
std::string escape_field(const std::string& s);
std::string unescape_field(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace emomni
