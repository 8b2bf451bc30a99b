#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "spinegrade/kernels.hpp"

namespace spinegrade::kernels {

// Tolerance for samples that land on the last grid plane up to rounding.
inline constexpr double kEdgeTolerance = 1e-9;

struct AxisSample {
    bool inside;
    std::int64_t i0;
    std::int64_t step;  // 0 on single-voxel axes
    double f;
};

inline AxisSample axis_sample(double x, std::int64_t n) {
    const double hi = static_cast<double>(n - 1);
    const bool inside = x >= -kEdgeTolerance && x <= hi + kEdgeTolerance;
    if (n == 1) return {inside, 0, 0, 0.0};
    const double xc = std::min(std::max(x, 0.0), hi);
    const double fl = std::min(std::floor(xc), hi - 1.0);
    return {inside, static_cast<std::int64_t>(fl), 1, xc - fl};
}

inline double blend(double v000, double v100, double v010, double v110, double v001, double v101, double v011,
                    double v111, double fx, double fy, double fz) {
    const double gx = 1.0 - fx;
    const double gy = 1.0 - fy;
    const double gz = 1.0 - fz;
    const double c00 = v000 * gx + v100 * fx;
    const double c10 = v010 * gx + v110 * fx;
    const double c01 = v001 * gx + v101 * fx;
    const double c11 = v011 * gx + v111 * fx;
    const double c0 = c00 * gy + c10 * fy;
    const double c1 = c01 * gy + c11 * fy;
    return c0 * gz + c1 * fz;
}

namespace scalar {
OverlapSums overlap_sums(const float* p, const float* g, std::size_t n);
double sum(const float* x, std::size_t n);
void subtract(float* x, std::size_t n, double value);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void adadelta(double* w, const double* g, double* acc_grad, double* acc_update, std::size_t n, double rho,
              double epsilon, double lr);
std::size_t trilinear_line(const SampleGrid& grid, const double* start, const double* step, std::size_t n,
                           float* out);
// Points first..last-1 of the same line; out is indexed by t.
std::size_t trilinear_range(const SampleGrid& grid, const double* start, const double* step, std::size_t first,
                            std::size_t last, float* out);
}  // namespace scalar

#if defined(SPINEGRADE_HAVE_AVX2)
namespace avx2 {
OverlapSums overlap_sums(const float* p, const float* g, std::size_t n);
double sum(const float* x, std::size_t n);
void subtract(float* x, std::size_t n, double value);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void adadelta(double* w, const double* g, double* acc_grad, double* acc_update, std::size_t n, double rho,
              double epsilon, double lr);
std::size_t trilinear_line(const SampleGrid& grid, const double* start, const double* step, std::size_t n,
                           float* out);
}  // namespace avx2
#endif

}  // namespace spinegrade::kernels
