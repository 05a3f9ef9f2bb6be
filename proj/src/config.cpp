#include "emomni/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emomni {

const std::vector<ConfigKey>& config_registry() {
    static const std::vector<ConfigKey> reg = {
        // ---- feature dimensions ----
        {"dims.d_sem", "32", "semantic encoder output dimension"},
        {"dims.d_emo", "16", "emotion encoder output dimension"},
        {"dims.d_model", "64", "backbone / decoder model width"},

        // ---- encoders ----
        {"encoder.semantic", "synthetic", "semantic encoder backend name"},
        {"encoder.emotion", "synthetic", "emotion encoder backend name"},
        {"encoder.frame_rate", "50", "native encoder frame rate in Hz"},

        // ---- feature adapters ----
        {"features.k_sem", "5", "semantic stream downsampling factor"},
        {"features.k_emo", "5", "emotion stream downsampling factor"},

        // ---- text backbone ----
        {"backbone.layers", "2", "backbone transformer layers"},
        {"backbone.heads", "4", "backbone attention heads"},
        {"backbone.mlp_mult", "4", "backbone MLP width multiplier"},
        {"backbone.max_len", "256", "maximum text token positions"},
        {"backbone.max_prefix", "64", "maximum continuous prefix positions"},
        {"backbone.seed", "1234", "backbone weight init seed"},

        // ---- low-rank adapters ----
        {"lora.rank", "8", "low-rank adapter rank"},
        {"lora.scale", "1.0", "adapter output scale"},
        {"lora.targets", "q,v", "projections receiving adapters (q,k,v,o)"},

        // ---- emotion prediction head ----
        {"emotion_head.hidden", "64", "emotion head hidden width"},
        {"emotion_head.seed", "2345", "emotion head init seed"},

        // ---- losses ----
        {"loss.lambda_emo", "0.5", "weight of the emotion loss in the total loss"},
        {"loss.alpha_cos", "0.5", "weight of the cosine term inside the emotion loss"},
        {"loss.eps", "1e-8", "row-norm floor below which cosine terms are zeroed"},

        // ---- speech decoder conditioning ----
        {"adaln.eps", "1e-6", "adaptive layer norm variance epsilon"},

        // ---- speech tokenizer ----
        {"fsq.levels", "8,5,5,5", "finite scalar quantizer levels per dimension"},

        // ---- speech audio contract ----
        {"speech.sample_rate", "16000", "waveform sample rate in Hz"},
        {"speech.chunk_samples", "320", "samples represented by one speech token"},
        {"speech.max_ratio", "10", "max speech tokens generated per text position"},

        // ---- speech token decoder ----
        {"decoder.layers", "4", "speech decoder transformer layers"},
        {"decoder.heads", "4", "speech decoder attention heads"},
        {"decoder.mlp_mult", "4", "speech decoder MLP width multiplier"},
        {"decoder.max_len", "512", "maximum prefix+token positions in the speech decoder"},
        {"decoder.seed", "4321", "speech decoder weight init seed"},

        // ---- training stages ----
        {"s1.steps", "300", "stage 1 optimization steps"},
        {"s1.lr", "0.05", "stage 1 learning rate"},
        {"s1.batch", "8", "stage 1 batch size"},
        {"s2_1.steps", "200", "stage 2.1 optimization steps"},
        {"s2_1.lr", "0.05", "stage 2.1 learning rate"},
        {"s2_1.batch", "8", "stage 2.1 batch size"},
        {"s2_2.steps", "100", "stage 2.2 optimization steps"},
        {"s2_2.lr", "0.05", "stage 2.2 learning rate"},
        {"s2_2.batch", "8", "stage 2.2 batch size"},
        {"train.seed", "7", "batch sampling seed"},

        // ---- data generation ----
        {"datagen.n", "200", "number of dialogue pairs to generate"},
        {"datagen.seed", "7", "data generation seed"},
        {"datagen.threshold", "0.0", "emotion filter confidence threshold"},
        {"datagen.text_backend", "synthetic", "dialogue text generator backend"},
        {"datagen.tts_backend", "synthetic", "speech synthesis backend"},
        {"datagen.classifier_backend", "synthetic", "emotion filter classifier backend"},
        {"datagen.domains",
         "education,healthcare,customer_service,entertainment,travel,finance,cooking,fitness,"
         "technology,music,sports,weather,shopping,career,relationships,parenting,gardening,"
         "history,science,art",
         "dialogue domain list"},
        {"datagen.speakers", "10", "speaker pool size (half male, half female)"},

        // ---- emotion label sets ----
        {"labels.query", "happiness,sadness,anger,anxiety,surprise,neutral",
         "query-side emotion labels"},
        {"labels.response", "cheerful,comforting,calming,reassuring,curious,neutral",
         "response-side emotion/style labels"},

        // ---- empathy mapping (query emotion -> response style) ----
        {"empathy.happiness", "cheerful", "response style for happy queries"},
        {"empathy.sadness", "comforting", "response style for sad queries"},
        {"empathy.anger", "calming", "response style for angry queries"},
        {"empathy.anxiety", "reassuring", "response style for anxious queries"},
        {"empathy.surprise", "curious", "response style for surprised queries"},
        {"empathy.neutral", "neutral", "response style for neutral queries"},

        // ---- judging ----
        {"judge.backend", "mock", "emotion-consistency judge backend"},
        {"judge.soothing_family", "comforting,calming,reassuring",
         "response styles counted as soothing"},
        {"judge.positive_family", "cheerful,curious", "response styles counted as positive"},

        // ---- paths ----
        {"paths.out_dir", "out", "default output directory (joined to EMOMNI_HOME when set)"},
        {"paths.data_dir", "data", "default dataset directory (joined to EMOMNI_HOME when set)"},
    };
    return reg;
}

RunConfig::RunConfig() {
    for (const auto& k : config_registry()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not an integer: '" + v + "'");
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not a number: '" + v + "'");
    }
}

static std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& s : split_commas(get(key))) {
        try {
            size_t pos = 0;
            out.push_back(std::stoi(s, &pos));
            if (pos != s.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + key + "' has a non-integer element: '" + s + "'");
        }
    }
    return out;
}

std::vector<std::string> RunConfig::get_str_list(const std::string& key) const {
    return split_commas(get(key));
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
}

static std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

RunConfig load_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not of the form key = value: '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " has an empty key");
        try {
            cfg.set(key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
        }
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return load_config_text(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(e.what()) + " in " + path);
    }
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot write '" + path + "'");
    for (const auto& k : config_registry()) {
        f << "# " << k.doc << "\n";
        f << k.key << " = " << cfg.get(k.key) << "\n\n";
    }
    if (!f) throw std::runtime_error("config: write failed for '" + path + "'");
}

}  // namespace emomni
