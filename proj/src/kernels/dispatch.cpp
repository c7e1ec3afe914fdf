#include "scomo/kernels.hpp"

#include <cstdlib>
#include <string>

namespace scomo::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& select() {
    if (const char* forced = std::getenv("SCOMO_KERNELS")) {
        const std::string want(forced);
        for (Isa isa : available())
            if (name(isa) == want) return *table(isa);
    }
    if (const KernelTable* t = table(Isa::avx2)) return *t;
    if (const KernelTable* t = table(Isa::neon)) return *t;
    return detail::scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& t = select();
    return t;
}

const KernelTable* table(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return &detail::scalar_table();
        case Isa::avx2:
            return cpu_has_avx2() ? detail::avx2_table() : nullptr;
        case Isa::neon:
            // Advanced SIMD is mandatory on AArch64.
            return detail::neon_table();
    }
    return nullptr;
}

std::vector<Isa> available() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
        if (table(isa) != nullptr) out.push_back(isa);
    return out;
}

std::string_view name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

}  // namespace scomo::kernels
