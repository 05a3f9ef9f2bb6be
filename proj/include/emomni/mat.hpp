// mat.hpp : dense row-major double matrices plus seeded randomness helpers
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace emomni {

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0);

    double& at(int r, int c) { return data[size_t(r) * cols + c]; }
    double at(int r, int c) const { return data[size_t(r) * cols + c]; }
    double* row(int r) { return data.data() + size_t(r) * cols; }
    const double* row(int r) const { return data.data() + size_t(r) * cols; }

    size_t size() const { return data.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
};

// a [m x k] @ b [k x n]
Mat mat_mul(const Mat& a, const Mat& b);
// a [m x k] @ b^T, b [n x k]
Mat mat_mul_nt(const Mat& a, const Mat& b);
// a^T @ b, a [k x m], b [k x n]
Mat mat_mul_tn(const Mat& a, const Mat& b);

Mat mat_add(const Mat& a, const Mat& b);
Mat mat_sub(const Mat& a, const Mat& b);
Mat mat_hadamard(const Mat& a, const Mat& b);
Mat mat_scale(const Mat& a, double c);
Mat mat_transpose(const Mat& a);

double mat_max_abs_diff(const Mat& a, const Mat& b);
bool mat_bitwise_equal(const Mat& a, const Mat& b);

// Deterministic 64-bit string hash (FNV-1a), used to derive per-name seeds.
uint64_t fnv1a(const std::string& s);

// Seeded RNG wrapper. All randomness in the project goes through this so
// every run is a pure function of the configured seeds.
class Rng {
public:
    explicit Rng(uint64_t seed);
    uint64_t next_u64();
    // uniform in [0,1) with 53-bit resolution, engine-portable
    double uniform();
    double normal(double stddev = 1.0);
    // uniform integer in [0, n)
    int below(int n);

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

Mat mat_randn(int r, int c, double stddev, uint64_t seed);

}  // namespace emomni
