// Compiled with -mavx2 -mfma; only reached through the dispatch table after a CPUID check.
// Loop tails are handed to the scalar kernels so no AVX code is emitted for shared templates.

#include <immintrin.h>

#include "kernels_internal.hpp"

namespace spinegrade::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

struct AxisLanes {
    __m256d inside;
    __m128i i0;
    __m256d f;
};

inline AxisLanes axis_lanes(__m256d x, std::int64_t n) {
    const double hi = static_cast<double>(n - 1);
    const __m256d lo_ok = _mm256_cmp_pd(x, _mm256_set1_pd(-kEdgeTolerance), _CMP_GE_OQ);
    const __m256d hi_ok = _mm256_cmp_pd(x, _mm256_set1_pd(hi + kEdgeTolerance), _CMP_LE_OQ);
    const __m256d inside = _mm256_and_pd(lo_ok, hi_ok);
    if (n == 1) return {inside, _mm_setzero_si128(), _mm256_setzero_pd()};
    const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, _mm256_setzero_pd()), _mm256_set1_pd(hi));
    const __m256d fl = _mm256_min_pd(_mm256_floor_pd(xc), _mm256_set1_pd(hi - 1.0));
    return {inside, _mm256_cvttpd_epi32(fl), _mm256_sub_pd(xc, fl)};
}

inline __m256d gather(const float* base, __m128i offsets, int delta) {
    const __m128i idx = _mm_add_epi32(offsets, _mm_set1_epi32(delta));
    return _mm256_cvtps_pd(_mm_i32gather_ps(base, idx, 4));
}

inline __m256d lerp(__m256d a, __m256d b, __m256d f, __m256d g) {
    return _mm256_add_pd(_mm256_mul_pd(a, g), _mm256_mul_pd(b, f));
}

}  // namespace

OverlapSums overlap_sums(const float* p, const float* g, std::size_t n) {
    __m256d inter = _mm256_setzero_pd();
    __m256d sp = _mm256_setzero_pd();
    __m256d sg = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d pv = _mm256_cvtps_pd(_mm_loadu_ps(p + i));
        const __m256d gv = _mm256_cvtps_pd(_mm_loadu_ps(g + i));
        inter = _mm256_add_pd(inter, _mm256_mul_pd(pv, gv));
        sp = _mm256_add_pd(sp, pv);
        sg = _mm256_add_pd(sg, gv);
    }
    OverlapSums tail = scalar::overlap_sums(p + i, g + i, n - i);
    tail.intersection += hsum(inter);
    tail.pred += hsum(sp);
    tail.truth += hsum(sg);
    return tail;
}

double sum(const float* x, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        a0 = _mm256_add_pd(a0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
        a1 = _mm256_add_pd(a1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
    }
    return hsum(_mm256_add_pd(a0, a1)) + scalar::sum(x + i, n - i);
}

void subtract(float* x, std::size_t n, double value) {
    const __m256d v = _mm256_set1_pd(value);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_cvtps_pd(_mm_loadu_ps(x + i)), v);
        _mm_storeu_ps(x + i, _mm256_cvtpd_ps(d));
    }
    scalar::subtract(x + i, n - i, value);
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    }
    return hsum(_mm256_add_pd(s0, s1)) + scalar::dot(a + i, b + i, n - i);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, r);
    }
    scalar::axpy(a, x + i, y + i, n - i);
}

void adadelta(double* w, const double* g, double* acc_grad, double* acc_update, std::size_t n, double rho,
              double epsilon, double lr) {
    const __m256d vr = _mm256_set1_pd(rho);
    const __m256d vr1 = _mm256_set1_pd(1.0 - rho);
    const __m256d ve = _mm256_set1_pd(epsilon);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d ag = _mm256_add_pd(_mm256_mul_pd(vr, _mm256_loadu_pd(acc_grad + i)),
                                         _mm256_mul_pd(vr1, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(acc_grad + i, ag);
        const __m256d au = _mm256_loadu_pd(acc_update + i);
        const __m256d ratio =
            _mm256_div_pd(_mm256_sqrt_pd(_mm256_add_pd(au, ve)), _mm256_sqrt_pd(_mm256_add_pd(ag, ve)));
        const __m256d delta = _mm256_mul_pd(_mm256_xor_pd(ratio, sign), gv);
        _mm256_storeu_pd(acc_update + i,
                         _mm256_add_pd(_mm256_mul_pd(vr, au), _mm256_mul_pd(vr1, _mm256_mul_pd(delta, delta))));
        _mm256_storeu_pd(w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(vlr, delta)));
    }
    scalar::adadelta(w + i, g + i, acc_grad + i, acc_update + i, n - i, rho, epsilon, lr);
}

std::size_t trilinear_line(const SampleGrid& grid, const double* start, const double* step, std::size_t n,
                           float* out) {
    const __m256d s0 = _mm256_set1_pd(start[0]);
    const __m256d s1 = _mm256_set1_pd(start[1]);
    const __m256d s2 = _mm256_set1_pd(start[2]);
    const __m256d d0 = _mm256_set1_pd(step[0]);
    const __m256d d1 = _mm256_set1_pd(step[1]);
    const __m256d d2 = _mm256_set1_pd(step[2]);
    const __m256d one = _mm256_set1_pd(1.0);
    const std::int64_t sy = grid.nx;
    const std::int64_t sz = grid.nx * grid.ny;
    const int dx = grid.nx > 1 ? 1 : 0;
    const int dy = grid.ny > 1 ? static_cast<int>(sy) : 0;
    const int dz = grid.nz > 1 ? static_cast<int>(sz) : 0;
    const __m128i vsy = _mm_set1_epi32(static_cast<int>(sy));
    const __m128i vsz = _mm_set1_epi32(static_cast<int>(sz));

    std::size_t inside = 0;
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
        const double td = static_cast<double>(t);
        const __m256d tv = _mm256_setr_pd(td, td + 1.0, td + 2.0, td + 3.0);
        const AxisLanes ax = axis_lanes(_mm256_add_pd(s0, _mm256_mul_pd(tv, d0)), grid.nx);
        const AxisLanes ay = axis_lanes(_mm256_add_pd(s1, _mm256_mul_pd(tv, d1)), grid.ny);
        const AxisLanes az = axis_lanes(_mm256_add_pd(s2, _mm256_mul_pd(tv, d2)), grid.nz);
        const __m256d in = _mm256_and_pd(_mm256_and_pd(ax.inside, ay.inside), az.inside);
        const int mask = _mm256_movemask_pd(in);
        if (mask == 0) {
            _mm_storeu_ps(out + t, _mm_setzero_ps());
            continue;
        }
        inside += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));

        const __m128i off =
            _mm_add_epi32(_mm_add_epi32(_mm_mullo_epi32(az.i0, vsz), _mm_mullo_epi32(ay.i0, vsy)), ax.i0);
        const __m256d gx = _mm256_sub_pd(one, ax.f);
        const __m256d gy = _mm256_sub_pd(one, ay.f);
        const __m256d gz = _mm256_sub_pd(one, az.f);
        const __m256d c00 = lerp(gather(grid.data, off, 0), gather(grid.data, off, dx), ax.f, gx);
        const __m256d c10 = lerp(gather(grid.data, off, dy), gather(grid.data, off, dx + dy), ax.f, gx);
        const __m256d c01 = lerp(gather(grid.data, off, dz), gather(grid.data, off, dx + dz), ax.f, gx);
        const __m256d c11 = lerp(gather(grid.data, off, dy + dz), gather(grid.data, off, dx + dy + dz), ax.f, gx);
        const __m256d c0 = lerp(c00, c10, ay.f, gy);
        const __m256d c1 = lerp(c01, c11, ay.f, gy);
        const __m256d v = _mm256_and_pd(lerp(c0, c1, az.f, gz), in);
        _mm_storeu_ps(out + t, _mm256_cvtpd_ps(v));
    }
    return inside + scalar::trilinear_range(grid, start, step, t, n, out);
}

}  // namespace spinegrade::kernels::avx2
