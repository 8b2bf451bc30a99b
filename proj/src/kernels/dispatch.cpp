#include <cstdlib>
#include <cstring>

#include "kernels_internal.hpp"

namespace spinegrade::kernels {

std::string_view to_string(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

const KernelTable& scalar_table() noexcept {
    static const KernelTable table{Isa::Scalar,  scalar::overlap_sums, scalar::sum,      scalar::subtract,
                                   scalar::dot,  scalar::axpy,         scalar::adadelta, scalar::trilinear_line};
    return table;
}

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* avx2_table() noexcept {
#if defined(SPINEGRADE_HAVE_AVX2)
    static const KernelTable table{Isa::Avx2, avx2::overlap_sums, avx2::sum,      avx2::subtract,
                                   avx2::dot, avx2::axpy,         avx2::adadelta, avx2::trilinear_line};
    return cpu_has_avx2() ? &table : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept {
    static const KernelTable& chosen = [] () -> const KernelTable& {
        const char* pin = std::getenv("SPINEGRADE_ISA");
        if (pin != nullptr && std::strcmp(pin, "scalar") == 0) return scalar_table();
        if (const KernelTable* t = avx2_table()) return *t;
        return scalar_table();
    }();
    return chosen;
}

}  // namespace spinegrade::kernels
