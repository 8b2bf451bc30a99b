#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference implementation and, on
// x86-64 builds, an AVX2 variant; the variant is picked once at runtime from CPUID and
// can be pinned with SPINEGRADE_ISA=scalar|avx2. Variants agree to rounding (reductions
// may associate differently); elementwise kernels agree bit for bit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace spinegrade::kernels {

enum class Isa { Scalar, Avx2 };
std::string_view to_string(Isa isa) noexcept;

struct OverlapSums {
    double intersection = 0.0;  // sum p*g
    double pred = 0.0;          // sum p
    double truth = 0.0;         // sum g
};

/// Read-only view of a float volume for sampling; index space is voxel units.
struct SampleGrid {
    const float* data = nullptr;
    std::int64_t nx = 0;
    std::int64_t ny = 0;
    std::int64_t nz = 0;
};

struct KernelTable {
    Isa isa;

    OverlapSums (*overlap_sums)(const float* p, const float* g, std::size_t n);
    double (*sum)(const float* x, std::size_t n);
    /// x[i] = float(double(x[i]) - value)
    void (*subtract)(float* x, std::size_t n, double value);

    double (*dot)(const double* a, const double* b, std::size_t n);
    /// y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    /// One Adadelta step over n parameters (see grading::adadelta_step).
    void (*adadelta)(double* w, const double* g, double* acc_grad, double* acc_update, std::size_t n,
                     double rho, double epsilon, double lr);

    /// Samples n points start + t*step (t = 0..n-1, voxel-index coordinates) with trilinear
    /// interpolation. Points outside [0, n-1] on any axis yield 0. Returns the in-bounds count.
    std::size_t (*trilinear_line)(const SampleGrid& grid, const double* start, const double* step,
                                  std::size_t n, float* out);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the build lacks AVX2 support or the CPU does not report AVX2+FMA.
const KernelTable* avx2_table() noexcept;
bool cpu_has_avx2() noexcept;

/// The table selected for this process (CPUID, overridable by SPINEGRADE_ISA).
const KernelTable& active() noexcept;

}  // namespace spinegrade::kernels
