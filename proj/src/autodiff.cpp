#include "emomni/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace emomni {

Mat& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

const Mat& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [k, v] : params_) out.push_back(k);
    return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : params_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

int Tape::push(Mat value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::leaf(Mat value, bool requires_grad) { return push(std::move(value), requires_grad); }

int Tape::param(ParamStore& store, const std::string& name, bool trainable) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return it->second;
    int id = push(store.get(name), trainable);
    param_nodes_[name] = id;
    return id;
}

void Tape::accum(int id, const Mat& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.grad_alloc) {
        n.grad = Mat(n.value.rows, n.value.cols, 0.0);
        n.grad_alloc = true;
    }
    for (size_t i = 0; i < g.size(); ++i) n.grad.data[i] += g.data[i];
}

Mat& Tape::grad_ref(int id) { return nodes_[id].grad; }

Mat Tape::grad_of(int id) const {
    const Node& n = nodes_[id];
    if (n.grad_alloc) return n.grad;
    return Mat(n.value.rows, n.value.cols, 0.0);
}

int Tape::matmul(int a, int b) {
    Mat v = mat_mul(nodes_[a].value, nodes_[b].value);
    bool rg = wants(a) || wants(b);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a, b](Tape& t) {
            const Mat& g = t.grad_ref(self);
            if (t.wants(a)) t.accum(a, mat_mul_nt(g, t.nodes_[b].value));
            if (t.wants(b)) t.accum(b, mat_mul_tn(t.nodes_[a].value, g));
        };
    }
    return self;
}

int Tape::matmul_nt(int a, int b) {
    Mat v = mat_mul_nt(nodes_[a].value, nodes_[b].value);
    bool rg = wants(a) || wants(b);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a, b](Tape& t) {
            const Mat& g = t.grad_ref(self);
            // C = A B^T : dA = G B ; dB = G^T A
            if (t.wants(a)) t.accum(a, mat_mul(g, t.nodes_[b].value));
            if (t.wants(b)) t.accum(b, mat_mul_tn(g, t.nodes_[a].value));
        };
    }
    return self;
}

int Tape::add(int a, int b) {
    Mat v = mat_add(nodes_[a].value, nodes_[b].value);
    bool rg = wants(a) || wants(b);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a, b](Tape& t) {
            const Mat& g = t.grad_ref(self);
            t.accum(a, g);
            t.accum(b, g);
        };
    }
    return self;
}

int Tape::sub(int a, int b) {
    Mat v = mat_sub(nodes_[a].value, nodes_[b].value);
    bool rg = wants(a) || wants(b);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a, b](Tape& t) {
            const Mat& g = t.grad_ref(self);
            t.accum(a, g);
            t.accum(b, mat_scale(g, -1.0));
        };
    }
    return self;
}

int Tape::mul(int a, int b) {
    Mat v = mat_hadamard(nodes_[a].value, nodes_[b].value);
    bool rg = wants(a) || wants(b);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a, b](Tape& t) {
            const Mat& g = t.grad_ref(self);
            if (t.wants(a)) t.accum(a, mat_hadamard(g, t.nodes_[b].value));
            if (t.wants(b)) t.accum(b, mat_hadamard(g, t.nodes_[a].value));
        };
    }
    return self;
}

int Tape::scale(int a, double c) {
    Mat v = mat_scale(nodes_[a].value, c);
    bool rg = wants(a);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a, c](Tape& t) { t.accum(a, mat_scale(t.grad_ref(self), c)); };
    }
    return self;
}

int Tape::add_const(int a, double c) {
    Mat v = nodes_[a].value;
    for (double& x : v.data) x += c;
    bool rg = wants(a);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a](Tape& t) { t.accum(a, t.grad_ref(self)); };
    }
    return self;
}

int Tape::add_rowvec(int a, int v) {
    const Mat& A = nodes_[a].value;
    const Mat& V = nodes_[v].value;
    if (V.rows != 1 || V.cols != A.cols) throw std::invalid_argument("add_rowvec: vector shape mismatch");
    Mat out = A;
    for (int i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        for (int j = 0; j < out.cols; ++j) r[j] += V.data[j];
    }
    bool rg = wants(a) || wants(v);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, v](Tape& t) {
            const Mat& g = t.grad_ref(self);
            t.accum(a, g);
            if (t.wants(v)) {
                Mat gv(1, g.cols, 0.0);
                for (int i = 0; i < g.rows; ++i) {
                    const double* r = g.row(i);
                    for (int j = 0; j < g.cols; ++j) gv.data[j] += r[j];
                }
                t.accum(v, gv);
            }
        };
    }
    return self;
}

int Tape::mul_rowvec(int a, int v) {
    const Mat& A = nodes_[a].value;
    const Mat& V = nodes_[v].value;
    if (V.rows != 1 || V.cols != A.cols) throw std::invalid_argument("mul_rowvec: vector shape mismatch");
    Mat out = A;
    for (int i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        for (int j = 0; j < out.cols; ++j) r[j] *= V.data[j];
    }
    bool rg = wants(a) || wants(v);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, v](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& A2 = t.nodes_[a].value;
            const Mat& V2 = t.nodes_[v].value;
            if (t.wants(a)) {
                Mat ga = g;
                for (int i = 0; i < ga.rows; ++i) {
                    double* r = ga.row(i);
                    for (int j = 0; j < ga.cols; ++j) r[j] *= V2.data[j];
                }
                t.accum(a, ga);
            }
            if (t.wants(v)) {
                Mat gv(1, g.cols, 0.0);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) gv.data[j] += g.at(i, j) * A2.at(i, j);
                t.accum(v, gv);
            }
        };
    }
    return self;
}

int Tape::concat_rows(int a, int b) {
    const Mat& A = nodes_[a].value;
    const Mat& B = nodes_[b].value;
    if (A.cols != B.cols && A.rows != 0 && B.rows != 0)
        throw std::invalid_argument("concat_rows: column mismatch");
    int cols = A.rows != 0 ? A.cols : B.cols;
    Mat out(A.rows + B.rows, cols);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(i, j) = A.at(i, j);
    for (int i = 0; i < B.rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(A.rows + i, j) = B.at(i, j);
    bool rg = wants(a) || wants(b);
    const int arows = A.rows;  // read before push() may reallocate nodes_
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, b, arows](Tape& t) {
            const Mat& g = t.grad_ref(self);
            if (t.wants(a) && arows > 0) {
                Mat ga(arows, g.cols);
                for (int i = 0; i < arows; ++i)
                    for (int j = 0; j < g.cols; ++j) ga.at(i, j) = g.at(i, j);
                t.accum(a, ga);
            }
            if (t.wants(b) && g.rows > arows) {
                Mat gb(g.rows - arows, g.cols);
                for (int i = 0; i < gb.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) gb.at(i, j) = g.at(arows + i, j);
                t.accum(b, gb);
            }
        };
    }
    return self;
}

int Tape::concat_cols(int a, int b) {
    const Mat& A = nodes_[a].value;
    const Mat& B = nodes_[b].value;
    if (A.rows != B.rows) throw std::invalid_argument("concat_cols: row mismatch");
    Mat out(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j);
        for (int j = 0; j < B.cols; ++j) out.at(i, A.cols + j) = B.at(i, j);
    }
    bool rg = wants(a) || wants(b);
    const int acols = A.cols;  // read before push() may reallocate nodes_
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, b, acols](Tape& t) {
            const Mat& g = t.grad_ref(self);
            if (t.wants(a)) {
                Mat ga(g.rows, acols);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < acols; ++j) ga.at(i, j) = g.at(i, j);
                t.accum(a, ga);
            }
            if (t.wants(b)) {
                Mat gb(g.rows, g.cols - acols);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < gb.cols; ++j) gb.at(i, j) = g.at(i, acols + j);
                t.accum(b, gb);
            }
        };
    }
    return self;
}

int Tape::slice_rows(int a, int r0, int r1) {
    const Mat& A = nodes_[a].value;
    if (r0 < 0 || r1 > A.rows || r0 > r1) throw std::invalid_argument("slice_rows: bad range");
    Mat out(r1 - r0, A.cols);
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < A.cols; ++j) out.at(i - r0, j) = A.at(i, j);
    bool rg = wants(a);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, r0](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& A2 = t.nodes_[a].value;
            Mat ga(A2.rows, A2.cols, 0.0);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) ga.at(r0 + i, j) = g.at(i, j);
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::slice_cols(int a, int c0, int c1) {
    const Mat& A = nodes_[a].value;
    if (c0 < 0 || c1 > A.cols || c0 > c1) throw std::invalid_argument("slice_cols: bad range");
    Mat out(A.rows, c1 - c0);
    for (int i = 0; i < A.rows; ++i)
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
    bool rg = wants(a);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, c0](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& A2 = t.nodes_[a].value;
            Mat ga(A2.rows, A2.cols, 0.0);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) ga.at(i, c0 + j) = g.at(i, j);
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::sigmoid(int a) {
    Mat v = nodes_[a].value;
    for (double& x : v.data) x = 1.0 / (1.0 + std::exp(-x));
    bool rg = wants(a);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& y = t.nodes_[self].value;
            Mat ga = g;
            for (size_t i = 0; i < ga.size(); ++i) ga.data[i] *= y.data[i] * (1.0 - y.data[i]);
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::tanh_op(int a) {
    Mat v = nodes_[a].value;
    for (double& x : v.data) x = std::tanh(x);
    bool rg = wants(a);
    int self = push(std::move(v), rg);
    if (rg) {
        nodes_[self].back = [self, a](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& y = t.nodes_[self].value;
            Mat ga = g;
            for (size_t i = 0; i < ga.size(); ++i) ga.data[i] *= 1.0 - y.data[i] * y.data[i];
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::layer_norm(int a, double eps) {
    const Mat& A = nodes_[a].value;
    Mat out(A.rows, A.cols);
    std::vector<double> inv_sigma(A.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* r = A.row(i);
        double mu = 0.0;
        for (int j = 0; j < A.cols; ++j) mu += r[j];
        mu /= A.cols;
        double var = 0.0;
        for (int j = 0; j < A.cols; ++j) {
            double d = r[j] - mu;
            var += d * d;
        }
        var /= A.cols;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = is;
        double* o = out.row(i);
        for (int j = 0; j < A.cols; ++j) o[j] = (r[j] - mu) * is;
    }
    bool rg = wants(a);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a, inv_sigma](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& y = t.nodes_[self].value;
            Mat ga(g.rows, g.cols);
            for (int i = 0; i < g.rows; ++i) {
                const double* gr = g.row(i);
                const double* yr = y.row(i);
                double gmean = 0.0, gymean = 0.0;
                for (int j = 0; j < g.cols; ++j) {
                    gmean += gr[j];
                    gymean += gr[j] * yr[j];
                }
                gmean /= g.cols;
                gymean /= g.cols;
                double* out_r = ga.row(i);
                for (int j = 0; j < g.cols; ++j)
                    out_r[j] = inv_sigma[i] * (gr[j] - gmean - yr[j] * gymean);
            }
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::causal_attend(int q, int k, int v, double sc) {
    const Mat& Q = nodes_[q].value;
    const Mat& K = nodes_[k].value;
    const Mat& V = nodes_[v].value;
    if (!Q.same_shape(K) || !Q.same_shape(V)) throw std::invalid_argument("causal_attend: shape mismatch");
    const int n = Q.rows, dh = Q.cols;
    Mat probs(n, n, 0.0);
    Mat ctx(n, dh, 0.0);
    std::vector<double> srow(n);
    for (int i = 0; i < n; ++i) {
        const double* qi = Q.row(i);
        double mx = -1e300;
        for (int j = 0; j <= i; ++j) {
            const double* kj = K.row(j);
            double s = 0.0;
            for (int d = 0; d < dh; ++d) s += qi[d] * kj[d];
            s *= sc;
            srow[j] = s;
            if (s > mx) mx = s;
        }
        double z = 0.0;
        for (int j = 0; j <= i; ++j) {
            srow[j] = std::exp(srow[j] - mx);
            z += srow[j];
        }
        double* pr = probs.row(i);
        double* ci = ctx.row(i);
        for (int j = 0; j <= i; ++j) {
            const double p = srow[j] / z;
            pr[j] = p;
            const double* vj = V.row(j);
            for (int d = 0; d < dh; ++d) ci[d] += p * vj[d];
        }
    }
    bool rg = wants(q) || wants(k) || wants(v);
    int self = push(std::move(ctx), rg);
    if (rg) {
        nodes_[self].back = [self, q, k, v, sc, probs](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& Q2 = t.nodes_[q].value;
            const Mat& K2 = t.nodes_[k].value;
            const Mat& V2 = t.nodes_[v].value;
            const int n2 = Q2.rows, dh2 = Q2.cols;
            Mat gq(n2, dh2, 0.0), gk(n2, dh2, 0.0), gv(n2, dh2, 0.0);
            std::vector<double> dp(n2), ds(n2);
            for (int i = 0; i < n2; ++i) {
                const double* gi = g.row(i);
                const double* pr = probs.row(i);
                double dsum = 0.0;
                for (int j = 0; j <= i; ++j) {
                    const double* vj = V2.row(j);
                    double d = 0.0;
                    for (int c = 0; c < dh2; ++c) d += vj[c] * gi[c];
                    dp[j] = d;
                    dsum += pr[j] * d;
                }
                const double* qi = Q2.row(i);
                double* gqi = gq.row(i);
                for (int j = 0; j <= i; ++j) {
                    const double p = pr[j];
                    ds[j] = p * (dp[j] - dsum);
                    const double* kj = K2.row(j);
                    double* gkj = gk.row(j);
                    double* gvj = gv.row(j);
                    const double dss = ds[j] * sc;
                    for (int c = 0; c < dh2; ++c) {
                        gqi[c] += dss * kj[c];
                        gkj[c] += dss * qi[c];
                        gvj[c] += p * gi[c];
                    }
                }
            }
            if (t.wants(q)) t.accum(q, gq);
            if (t.wants(k)) t.accum(k, gk);
            if (t.wants(v)) t.accum(v, gv);
        };
    }
    return self;
}

int Tape::embed(int table, const std::vector<int>& ids) {
    const Mat& T = nodes_[table].value;
    Mat out(int(ids.size()), T.cols);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= T.rows) throw std::out_of_range("embed: id out of range");
        for (int j = 0; j < T.cols; ++j) out.at(int(i), j) = T.at(ids[i], j);
    }
    bool rg = wants(table);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, table, ids](Tape& t) {
            const Mat& g = t.grad_ref(self);
            const Mat& T2 = t.nodes_[table].value;
            Mat gt(T2.rows, T2.cols, 0.0);
            for (size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < g.cols; ++j) gt.at(ids[i], j) += g.at(int(i), j);
            t.accum(table, gt);
        };
    }
    return self;
}

int Tape::mean_all(int a) {
    const Mat& A = nodes_[a].value;
    if (A.size() == 0) throw std::invalid_argument("mean_all: empty matrix");
    double s = 0.0;
    for (double x : A.data) s += x;
    Mat out(1, 1, s / double(A.size()));
    bool rg = wants(a);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a](Tape& t) {
            const double g = t.grad_ref(self).data[0];
            const Mat& A2 = t.nodes_[a].value;
            Mat ga(A2.rows, A2.cols, g / double(A2.size()));
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::sum_all(int a) {
    const Mat& A = nodes_[a].value;
    double s = 0.0;
    for (double x : A.data) s += x;
    Mat out(1, 1, s);
    bool rg = wants(a);
    int self = push(std::move(out), rg);
    if (rg) {
        nodes_[self].back = [self, a](Tape& t) {
            const double g = t.grad_ref(self).data[0];
            const Mat& A2 = t.nodes_[a].value;
            Mat ga(A2.rows, A2.cols, g);
            t.accum(a, ga);
        };
    }
    return self;
}

int Tape::softmax_xent(int logits, const std::vector<int>& targets) {
    const Mat& L = nodes_[logits].value;
    if (int(targets.size()) != L.rows) throw std::invalid_argument("softmax_xent: target count mismatch");
    Mat probs(L.rows, L.cols);
    double loss = 0.0;
    for (int i = 0; i < L.rows; ++i) {
        if (targets[i] < 0 || targets[i] >= L.cols) throw std::out_of_range("softmax_xent: target id out of range");
        const double* r = L.row(i);
        double mx = r[0];
        for (int j = 1; j < L.cols; ++j) mx = std::max(mx, r[j]);
        double z = 0.0;
        for (int j = 0; j < L.cols; ++j) z += std::exp(r[j] - mx);
        const double lse = mx + std::log(z);
        loss += lse - r[targets[i]];
        double* pr = probs.row(i);
        for (int j = 0; j < L.cols; ++j) pr[j] = std::exp(r[j] - lse);
    }
    loss /= double(L.rows);
    bool rg = wants(logits);
    int self = push(Mat(1, 1, loss), rg);
    if (rg) {
        nodes_[self].back = [self, logits, targets, probs](Tape& t) {
            const double g = t.grad_ref(self).data[0];
            Mat gl = probs;
            const double inv_n = 1.0 / double(gl.rows);
            for (int i = 0; i < gl.rows; ++i) {
                double* r = gl.row(i);
                r[targets[i]] -= 1.0;
                for (int j = 0; j < gl.cols; ++j) r[j] *= g * inv_n;
            }
            t.accum(logits, gl);
        };
    }
    return self;
}

int Tape::row_cosine_mean(int a, int b, double eps) {
    const Mat& A = nodes_[a].value;
    const Mat& B = nodes_[b].value;
    if (!A.same_shape(B)) throw std::invalid_argument("row_cosine_mean: shape mismatch");
    const int n = A.rows;
    std::vector<double> na(n), nb(n), cs(n);
    std::vector<char> active(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* ar = A.row(i);
        const double* br = B.row(i);
        double da = 0.0, db = 0.0, dot = 0.0;
        for (int j = 0; j < A.cols; ++j) {
            da += ar[j] * ar[j];
            db += br[j] * br[j];
            dot += ar[j] * br[j];
        }
        na[i] = std::sqrt(da);
        nb[i] = std::sqrt(db);
        if (na[i] < eps || nb[i] < eps) {
            active[i] = 0;
            cs[i] = 0.0;
        } else {
            active[i] = 1;
            cs[i] = dot / (na[i] * nb[i]);
        }
        total += cs[i];
    }
    bool rg = wants(a) || wants(b);
    int self = push(Mat(1, 1, total / double(n)), rg);
    if (rg) {
        nodes_[self].back = [self, a, b, na, nb, cs, active](Tape& t) {
            const double g = t.grad_ref(self).data[0];
            const Mat& A2 = t.nodes_[a].value;
            const Mat& B2 = t.nodes_[b].value;
            const int n2 = A2.rows;
            const double inv_n = 1.0 / double(n2);
            Mat ga(A2.rows, A2.cols, 0.0), gb(B2.rows, B2.cols, 0.0);
            for (int i = 0; i < n2; ++i) {
                if (!active[i]) continue;
                const double* ar = A2.row(i);
                const double* br = B2.row(i);
                double* gar = ga.row(i);
                double* gbr = gb.row(i);
                const double inv_ab = 1.0 / (na[i] * nb[i]);
                const double ca = cs[i] / (na[i] * na[i]);
                const double cb = cs[i] / (nb[i] * nb[i]);
                for (int j = 0; j < A2.cols; ++j) {
                    gar[j] = g * inv_n * (br[j] * inv_ab - ca * ar[j]);
                    gbr[j] = g * inv_n * (ar[j] * inv_ab - cb * br[j]);
                }
            }
            if (t.wants(a)) t.accum(a, ga);
            if (t.wants(b)) t.accum(b, gb);
        };
    }
    return self;
}

void Tape::backward(int loss_node) {
    Node& ln = nodes_[loss_node];
    if (ln.value.rows != 1 || ln.value.cols != 1)
        throw std::invalid_argument("backward: loss node must be a 1x1 scalar");
    if (!ln.requires_grad) return;
    ln.grad = Mat(1, 1, 1.0);
    ln.grad_alloc = true;
    for (int i = loss_node; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad_alloc && n.back) n.back(*this);
    }
}

Mat numeric_gradient(const std::function<double(const Mat&)>& f, Mat x, double step) {
    Mat g(x.rows, x.cols);
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = x.data[i];
        const double h = step * std::max(1.0, std::fabs(orig));
        x.data[i] = orig + h;
        const double fp = f(x);
        x.data[i] = orig - h;
        const double fm = f(x);
        x.data[i] = orig;
        g.data[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double gradient_rel_error(const Mat& analytic, const Mat& numeric) {
    if (!analytic.same_shape(numeric)) throw std::invalid_argument("gradient_rel_error: shape mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data[i];
        const double n = numeric.data[i];
        const double denom = std::max({std::fabs(a), std::fabs(n), 1e-6});
        worst = std::max(worst, std::fabs(a - n) / denom);
    }
    return worst;
}

}  // namespace emomni
