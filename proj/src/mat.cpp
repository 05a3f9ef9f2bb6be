#include "emomni/mat.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace emomni {

Mat::Mat(int r, int c, double fill) : rows(r), cols(c), data(size_t(r) * size_t(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative dimensions");
}

bool Mat::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Mat mat_mul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("mat_mul: inner dimension mismatch");
    Mat c(a.rows, b.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ar[k];
            if (aik == 0.0) continue;
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

Mat mat_mul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw std::invalid_argument("mat_mul_nt: inner dimension mismatch");
    Mat c(a.rows, b.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
    return c;
}

Mat mat_mul_tn(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw std::invalid_argument("mat_mul_tn: inner dimension mismatch");
    Mat c(a.cols, b.cols, 0.0);
    for (int k = 0; k < a.rows; ++k) {
        const double* ar = a.row(k);
        const double* br = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = ar[i];
            if (aki == 0.0) continue;
            double* cr = c.row(i);
            for (int j = 0; j < b.cols; ++j) cr[j] += aki * br[j];
        }
    }
    return c;
}

Mat mat_add(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mat_add: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Mat mat_sub(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mat_sub: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Mat mat_hadamard(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mat_hadamard: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Mat mat_scale(const Mat& a, double c) {
    Mat r = a;
    for (double& v : r.data) v *= c;
    return r;
}

Mat mat_transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double mat_max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mat_max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

bool mat_bitwise_equal(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) return false;
    if (a.size() == 0) return true;
    return std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(double)) == 0;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64: tiny, stdlib-independent, identical everywhere
static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Rng::Rng(uint64_t seed) : state_(seed ^ 0x6a09e667f3bcc909ull) {
    // warm up so nearby seeds diverge
    for (int i = 0; i < 4; ++i) splitmix64(state_);
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal(double stddev) {
    if (have_spare_) {
        have_spare_ = false;
        return spare_ * stddev;
    }
    double u1 = 0.0, u2 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2) * stddev;
}

int Rng::below(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    return int(next_u64() % uint64_t(n));
}

Mat mat_randn(int r, int c, double stddev, uint64_t seed) {
    Mat m(r, c);
    Rng rng(seed);
    for (double& v : m.data) v = rng.normal(stddev);
    return m;
}

}  // namespace emomni
