#pragma once

// Data-parallel inner loops shared by the numerical modules.
//
// Every kernel has a scalar reference implementation; vector variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled in separate translation
// units and picked at runtime from the CPU feature set. Set SCOMO_KERNELS to
// "scalar", "avx2" or "neon" to force a table.

#include <cstddef>
#include <string_view>
#include <vector>

namespace scomo::kernels {

enum class Isa { scalar, avx2, neon };

/// Direct-form II transposed biquad, a0 normalized to 1.
struct BiquadCoefficients {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct KernelTable {
    Isa isa;

    double (*dot)(const double* a, const double* b, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // Plane rotation of two rows: x' = c x - s y, y' = s x + c y.
    void (*rotate)(double* x, double* y, std::size_t n, double c, double s);

    // out = base + wp * p + wq * q
    void (*blend)(const double* base, const double* p, double wp, const double* q,
                  double wq, double* out, std::size_t n);

    // Filters `frames` rows of a row-major frames x channels block, all
    // channels in lockstep. z1/z2 hold per-channel state and are updated.
    // `in` and `out` may alias.
    void (*biquad)(const BiquadCoefficients& k, const double* in, double* out,
                   std::size_t frames, std::size_t channels, double* z1, double* z2);
};

const KernelTable& active();

/// Table for a specific ISA, or nullptr when the build or CPU lacks it.
const KernelTable* table(Isa isa);

std::vector<Isa> available();

std::string_view name(Isa isa);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace scomo::kernels
