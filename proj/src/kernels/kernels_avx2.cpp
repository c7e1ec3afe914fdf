// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "scomo/kernels.hpp"

#if defined(SCOMO_HAVE_AVX2)
#include <immintrin.h>

namespace scomo::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc0 = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc0);
    __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
    const __m256d vc = _mm256_set1_pd(c);
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xi = _mm256_loadu_pd(x + i);
        const __m256d yi = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(x + i, _mm256_fmsub_pd(vc, xi, _mm256_mul_pd(vs, yi)));
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vs, xi, _mm256_mul_pd(vc, yi)));
    }
    for (; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

void blend(const double* base, const double* p, double wp, const double* q, double wq,
           double* out, std::size_t n) {
    const __m256d vp = _mm256_set1_pd(wp);
    const __m256d vq = _mm256_set1_pd(wq);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_fmadd_pd(vp, _mm256_loadu_pd(p + i), _mm256_loadu_pd(base + i));
        r = _mm256_fmadd_pd(vq, _mm256_loadu_pd(q + i), r);
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) out[i] = base[i] + wp * p[i] + wq * q[i];
}

void biquad(const BiquadCoefficients& k, const double* in, double* out, std::size_t frames,
            std::size_t channels, double* z1, double* z2) {
    const __m256d b0 = _mm256_set1_pd(k.b0);
    const __m256d b1 = _mm256_set1_pd(k.b1);
    const __m256d b2 = _mm256_set1_pd(k.b2);
    const __m256d a1 = _mm256_set1_pd(k.a1);
    const __m256d a2 = _mm256_set1_pd(k.a2);
    const std::size_t vec_end = channels - channels % 4;
    for (std::size_t f = 0; f < frames; ++f) {
        const double* x = in + f * channels;
        double* y = out + f * channels;
        std::size_t c = 0;
        for (; c < vec_end; c += 4) {
            const __m256d xv = _mm256_loadu_pd(x + c);
            const __m256d s1 = _mm256_loadu_pd(z1 + c);
            const __m256d s2 = _mm256_loadu_pd(z2 + c);
            const __m256d yv = _mm256_fmadd_pd(b0, xv, s1);
            __m256d n1 = _mm256_fmadd_pd(b1, xv, s2);
            n1 = _mm256_fnmadd_pd(a1, yv, n1);
            __m256d n2 = _mm256_mul_pd(b2, xv);
            n2 = _mm256_fnmadd_pd(a2, yv, n2);
            _mm256_storeu_pd(z1 + c, n1);
            _mm256_storeu_pd(z2 + c, n2);
            _mm256_storeu_pd(y + c, yv);
        }
        for (; c < channels; ++c) {
            const double xv = x[c];
            const double yv = k.b0 * xv + z1[c];
            z1[c] = k.b1 * xv - k.a1 * yv + z2[c];
            z2[c] = k.b2 * xv - k.a2 * yv;
            y[c] = yv;
        }
    }
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable t{Isa::avx2, dot, axpy, rotate, blend, biquad};
    return &t;
}

}  // namespace scomo::kernels::detail

#else

namespace scomo::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace scomo::kernels::detail

#endif
