#include <cmath>

#include "kernels_internal.hpp"

namespace spinegrade::kernels::scalar {

OverlapSums overlap_sums(const float* p, const float* g, std::size_t n) {
    OverlapSums s;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = p[i];
        const double gi = g[i];
        s.intersection += pi * gi;
        s.pred += pi;
        s.truth += gi;
    }
    return s;
}

double sum(const float* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

void subtract(float* x, std::size_t n, double value) {
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(static_cast<double>(x[i]) - value);
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void adadelta(double* w, const double* g, double* acc_grad, double* acc_update, std::size_t n, double rho,
              double epsilon, double lr) {
    for (std::size_t i = 0; i < n; ++i) {
        acc_grad[i] = rho * acc_grad[i] + (1.0 - rho) * (g[i] * g[i]);
        const double delta = -(std::sqrt(acc_update[i] + epsilon) / std::sqrt(acc_grad[i] + epsilon)) * g[i];
        acc_update[i] = rho * acc_update[i] + (1.0 - rho) * (delta * delta);
        w[i] += lr * delta;
    }
}

std::size_t trilinear_line(const SampleGrid& grid, const double* start, const double* step, std::size_t n,
                           float* out) {
    return trilinear_range(grid, start, step, 0, n, out);
}

std::size_t trilinear_range(const SampleGrid& grid, const double* start, const double* step, std::size_t first,
                            std::size_t last, float* out) {
    std::size_t inside = 0;
    for (std::size_t t = first; t < last; ++t) {
        const double td = static_cast<double>(t);
        const double x = start[0] + td * step[0];
        const double y = start[1] + td * step[1];
        const double z = start[2] + td * step[2];
        const AxisSample ax = axis_sample(x, grid.nx);
        const AxisSample ay = axis_sample(y, grid.ny);
        const AxisSample az = axis_sample(z, grid.nz);
        if (!(ax.inside && ay.inside && az.inside)) {
            out[t] = 0.0f;
            continue;
        }
        ++inside;
        const std::int64_t sy = grid.nx;
        const std::int64_t sz = grid.nx * grid.ny;
        const float* base = grid.data + az.i0 * sz + ay.i0 * sy + ax.i0;
        const std::int64_t dx = ax.step;
        const std::int64_t dy = ay.step * sy;
        const std::int64_t dz = az.step * sz;
        out[t] = static_cast<float>(blend(base[0], base[dx], base[dy], base[dx + dy], base[dz], base[dx + dz],
                                          base[dy + dz], base[dx + dy + dz], ax.f, ay.f, az.f));
    }
    return inside;
}

}  // namespace spinegrade::kernels::scalar
