#include "emomni/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emomni {

namespace {

void put_u16(std::string& s, uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

uint16_t get_u16(const unsigned char* p) { return uint16_t(p[0] | (p[1] << 8)); }
uint32_t get_u32(const unsigned char* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

std::string slurp(const std::string& path, const char* what) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(std::string(what) + ": cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& bytes, const char* what) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(std::string(what) + ": cannot write '" + path + "'");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error(std::string(what) + ": write failed for '" + path + "'");
}

}  // namespace

void write_wav(const std::string& path, const Waveform& w) {
    validate_waveform(w);
    const uint32_t n = uint32_t(w.samples.size());
    std::string pcm;
    pcm.reserve(n * 2);
    for (double s : w.samples) {
        double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
        int v = int(std::lrint(c * 32767.0));
        put_u16(pcm, uint16_t(int16_t(v)));
    }
    std::string out;
    out.reserve(44 + pcm.size());
    out += "RIFF";
    put_u32(out, uint32_t(36 + pcm.size()));
    out += "WAVEfmt ";
    put_u32(out, 16);                              // fmt chunk size
    put_u16(out, 1);                               // PCM
    put_u16(out, 1);                               // mono
    put_u32(out, uint32_t(w.sample_rate));
    put_u32(out, uint32_t(w.sample_rate) * 2);     // byte rate
    put_u16(out, 2);                               // block align
    put_u16(out, 16);                              // bits per sample
    out += "data";
    put_u32(out, uint32_t(pcm.size()));
    out += pcm;
    spit(path, out, "wav");
}

Waveform read_wav(const std::string& path) {
    const std::string bytes = slurp(path, "wav");
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const size_t n = bytes.size();
    if (n < 44 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw std::runtime_error("wav: '" + path + "' is not a RIFF/WAVE file");

    Waveform w;
    bool have_fmt = false, have_data = false;
    size_t off = 12;
    while (off + 8 <= n) {
        const char* tag = bytes.data() + off;
        const uint32_t sz = get_u32(p + off + 4);
        const size_t body = off + 8;
        if (body + sz > n) throw std::runtime_error("wav: truncated chunk in '" + path + "'");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (sz < 16) throw std::runtime_error("wav: short fmt chunk in '" + path + "'");
            const uint16_t format = get_u16(p + body);
            const uint16_t channels = get_u16(p + body + 2);
            const uint32_t rate = get_u32(p + body + 4);
            const uint16_t bits = get_u16(p + body + 14);
            if (format != 1 || channels != 1 || bits != 16)
                throw std::runtime_error("wav: '" + path + "' must be 16-bit PCM mono");
            w.sample_rate = int(rate);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            w.samples.reserve(sz / 2);
            for (uint32_t i = 0; i + 1 < sz; i += 2) {
                const int16_t v = int16_t(get_u16(p + body + i));
                w.samples.push_back(double(v) / 32767.0);
            }
            have_data = true;
        }
        off = body + sz + (sz & 1);  // chunks are word aligned
    }
    if (!have_fmt || !have_data)
        throw std::runtime_error("wav: '" + path + "' is missing fmt or data chunk");
    validate_waveform(w);
    return w;
}

void write_feature_dump(const std::string& path, const FeatureSequence& seq) {
    char head[96];
    std::snprintf(head, sizeof head, "EOF1 %d %d %.17g\n", seq.frames.rows, seq.frames.cols,
                  seq.frame_rate);
    std::string out(head);
    out.reserve(out.size() + seq.frames.size() * 4);
    for (double d : seq.frames.data) {
        float f = float(d);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32(out, u);
    }
    spit(path, out, "feature dump");
}

FeatureSequence read_feature_dump(const std::string& path) {
    const std::string bytes = slurp(path, "feature dump");
    const size_t nl = bytes.find('\n');
    if (nl == std::string::npos) throw std::runtime_error("feature dump: missing header in '" + path + "'");
    int T = 0, D = 0;
    double rate = 0.0;
    if (std::sscanf(bytes.c_str(), "EOF1 %d %d %lg", &T, &D, &rate) != 3 || T < 0 || D <= 0)
        throw std::runtime_error("feature dump: malformed header in '" + path + "'");
    const size_t need = size_t(T) * size_t(D) * 4;
    if (bytes.size() - nl - 1 != need)
        throw std::runtime_error("feature dump: payload size mismatch in '" + path + "'");
    FeatureSequence seq;
    seq.frame_rate = rate;
    seq.frames = Mat(T, D);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data()) + nl + 1;
    for (size_t i = 0; i < size_t(T) * size_t(D); ++i) {
        uint32_t u = get_u32(p + i * 4);
        float f;
        std::memcpy(&f, &u, 4);
        seq.frames.data[i] = double(f);
    }
    return seq;
}

void write_token_file(const std::string& path, const std::vector<std::vector<int>>& utterances) {
    std::string out;
    for (const auto& utt : utterances) {
        for (size_t i = 0; i < utt.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(utt[i]);
        }
        out += '\n';
    }
    spit(path, out, "token file");
}

std::vector<std::vector<int>> read_token_file(const std::string& path) {
    const std::string bytes = slurp(path, "token file");
    std::vector<std::vector<int>> out;
    std::istringstream is(bytes);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<int> utt;
        std::string tok;
        while (ls >> tok) {
            try {
                size_t pos = 0;
                utt.push_back(std::stoi(tok, &pos));
                if (pos != tok.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw std::runtime_error("token file: bad token '" + tok + "' at line " +
                                         std::to_string(lineno) + " of '" + path + "'");
            }
        }
        out.push_back(std::move(utt));
    }
    return out;
}

std::string escape_field(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape_field(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out += s[i];
            continue;
        }
        if (i + 1 >= s.size()) throw std::runtime_error("field: dangling escape");
        switch (s[++i]) {
            case '\\': out += '\\'; break;
            case 't': out += '\t'; break;
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            default: throw std::runtime_error(std::string("field: unknown escape '\\") + s[i] + "'");
        }
    }
    return out;
}

std::string read_text_file(const std::string& path) { return slurp(path, "file"); }

void write_text_file(const std::string& path, const std::string& text) {
    spit(path, text, "file");
}

}  // namespace emomni
