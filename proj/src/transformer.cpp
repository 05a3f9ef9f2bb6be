#include "emomni/transformer.hpp"

#include <cmath>
#include <stdexcept>

namespace emomni {

namespace {

constexpr double kLnEps = 1e-6;

Mat named_randn(int r, int c, double stddev, uint64_t seed, const std::string& name) {
    return mat_randn(r, c, stddev, seed ^ fnv1a(name));
}

void check_spec(const TransformerSpec& s) {
    if (s.layers < 1 || s.heads < 1 || s.d_model < 1 || s.mlp_mult < 1)
        throw std::invalid_argument("transformer: all spec fields must be positive");
    if (s.d_model % s.heads != 0)
        throw std::invalid_argument("transformer: d_model must be divisible by heads");
}

std::string proj_name(const std::string& prefix, int layer, const std::string& target) {
    return prefix + ".l" + std::to_string(layer) + ".attn.w" + target;
}

// x @ W plus the adapter delta when one is attached to W.
int project(Tape& t, ParamStore& ps, const std::string& wname, int x, double lora_scale,
            const TrainableFn& trainable) {
    int out = t.matmul(x, t.param(ps, wname, trainable(wname)));
    const std::string down_name = wname + ".lora_down";
    if (ps.has(down_name)) {
        const std::string up_name = wname + ".lora_up";
        int down = t.param(ps, down_name, trainable(down_name));
        int up = t.param(ps, up_name, trainable(up_name));
        out = t.add(out, t.scale(t.matmul(t.matmul(x, down), up), lora_scale));
    }
    return out;
}

int layer_norm_affine(Tape& t, ParamStore& ps, const std::string& base, int x,
                      const TrainableFn& trainable) {
    int g = t.param(ps, base + ".gain", trainable(base + ".gain"));
    int b = t.param(ps, base + ".bias", trainable(base + ".bias"));
    return t.add_rowvec(t.mul_rowvec(t.layer_norm(x, kLnEps), g), b);
}

}  // namespace

void init_transformer(ParamStore& ps, const std::string& prefix, const TransformerSpec& s,
                      uint64_t seed) {
    check_spec(s);
    const int d = s.d_model;
    const double sd = 1.0 / std::sqrt(double(d));
    const double sd_out = 0.5 / std::sqrt(double(d));  // keep residual stream input-dominated
    for (int l = 0; l < s.layers; ++l) {
        const std::string lp = prefix + ".l" + std::to_string(l);
        ps.set(lp + ".ln1.gain", Mat(1, d, 1.0));
        ps.set(lp + ".ln1.bias", Mat(1, d, 0.0));
        for (const char* tgt : {"q", "k", "v"}) {
            const std::string n = lp + ".attn.w" + std::string(tgt);
            ps.set(n, named_randn(d, d, sd, seed, n));
        }
        ps.set(lp + ".attn.wo", named_randn(d, d, sd_out, seed, lp + ".attn.wo"));
        ps.set(lp + ".ln2.gain", Mat(1, d, 1.0));
        ps.set(lp + ".ln2.bias", Mat(1, d, 0.0));
        ps.set(lp + ".mlp.w1", named_randn(d, d * s.mlp_mult, sd, seed, lp + ".mlp.w1"));
        ps.set(lp + ".mlp.b1", Mat(1, d * s.mlp_mult, 0.0));
        ps.set(lp + ".mlp.w2", named_randn(d * s.mlp_mult, d, sd_out / std::sqrt(double(s.mlp_mult)),
                                           seed, lp + ".mlp.w2"));
        ps.set(lp + ".mlp.b2", Mat(1, d, 0.0));
    }
    ps.set(prefix + ".final_ln.gain", Mat(1, d, 1.0));
    ps.set(prefix + ".final_ln.bias", Mat(1, d, 0.0));
}

int transformer_nodes(Tape& t, ParamStore& ps, const std::string& prefix,
                      const TransformerSpec& s, int x, const TrainableFn& trainable) {
    check_spec(s);
    const int d = s.d_model;
    const int dh = d / s.heads;
    const double att_scale = 1.0 / std::sqrt(double(dh));
    int h = x;
    for (int l = 0; l < s.layers; ++l) {
        const std::string lp = prefix + ".l" + std::to_string(l);
        int a_in = layer_norm_affine(t, ps, lp + ".ln1", h, trainable);
        int q = project(t, ps, lp + ".attn.wq", a_in, s.lora_scale, trainable);
        int k = project(t, ps, lp + ".attn.wk", a_in, s.lora_scale, trainable);
        int v = project(t, ps, lp + ".attn.wv", a_in, s.lora_scale, trainable);
        int ctx = -1;
        for (int head = 0; head < s.heads; ++head) {
            const int c0 = head * dh, c1 = (head + 1) * dh;
            int one = t.causal_attend(t.slice_cols(q, c0, c1), t.slice_cols(k, c0, c1),
                                      t.slice_cols(v, c0, c1), att_scale);
            ctx = head == 0 ? one : t.concat_cols(ctx, one);
        }
        int attn_out = project(t, ps, lp + ".attn.wo", ctx, s.lora_scale, trainable);
        h = t.add(h, attn_out);

        int m_in = layer_norm_affine(t, ps, lp + ".ln2", h, trainable);
        int w1 = t.param(ps, lp + ".mlp.w1", trainable(lp + ".mlp.w1"));
        int b1 = t.param(ps, lp + ".mlp.b1", trainable(lp + ".mlp.b1"));
        int w2 = t.param(ps, lp + ".mlp.w2", trainable(lp + ".mlp.w2"));
        int b2 = t.param(ps, lp + ".mlp.b2", trainable(lp + ".mlp.b2"));
        int mid = t.tanh_op(t.add_rowvec(t.matmul(m_in, w1), b1));
        h = t.add(h, t.add_rowvec(t.matmul(mid, w2), b2));
    }
    return layer_norm_affine(t, ps, prefix + ".final_ln", h, trainable);
}

void attach_lora_params(ParamStore& ps, const std::string& prefix, const TransformerSpec& s,
                        int rank, const std::vector<std::string>& targets, uint64_t seed) {
    check_spec(s);
    if (rank < 1) throw std::invalid_argument("lora: rank must be >= 1");
    for (const std::string& tgt : targets) {
        if (tgt != "q" && tgt != "k" && tgt != "v" && tgt != "o")
            throw std::invalid_argument("lora: unknown target '" + tgt + "' (use q,k,v,o)");
        for (int l = 0; l < s.layers; ++l) {
            const std::string base = proj_name(prefix, l, tgt);
            if (!ps.has(base)) throw std::invalid_argument("lora: no base matrix '" + base + "'");
            const std::string dn = base + ".lora_down";
            ps.set(dn, named_randn(s.d_model, rank, 0.1, seed, dn));
            ps.set(base + ".lora_up", Mat(rank, s.d_model, 0.0));
        }
    }
}

void merge_lora_params(ParamStore& ps, const std::string& prefix, const TransformerSpec& s) {
    check_spec(s);
    for (int l = 0; l < s.layers; ++l) {
        for (const char* tgt : {"q", "k", "v", "o"}) {
            const std::string base = proj_name(prefix, l, tgt);
            const std::string dn = base + ".lora_down";
            if (!ps.has(dn)) continue;
            const std::string un = base + ".lora_up";
            Mat delta = mat_scale(mat_mul(ps.get(dn), ps.get(un)), s.lora_scale);
            ps.set(base, mat_add(ps.get(base), delta));
            ps.erase(dn);
            ps.erase(un);
        }
    }
}

std::vector<std::string> lora_param_names(const ParamStore& ps, const std::string& prefix) {
    std::vector<std::string> out;
    for (const std::string& n : ps.names_with_prefix(prefix))
        if (n.size() > 10 && (n.rfind(".lora_down") == n.size() - 10 ||
                              n.rfind(".lora_up") == n.size() - 8))
            out.push_back(n);
    return out;
}

}  // namespace emomni
