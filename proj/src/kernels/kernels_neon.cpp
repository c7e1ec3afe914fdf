#include "scomo/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

namespace scomo::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t xi = vld1q_f64(x + i);
        const float64x2_t yi = vld1q_f64(y + i);
        vst1q_f64(x + i, vfmsq_n_f64(vmulq_n_f64(xi, c), yi, s));
        vst1q_f64(y + i, vfmaq_n_f64(vmulq_n_f64(yi, c), xi, s));
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
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t r = vfmaq_n_f64(vld1q_f64(base + i), vld1q_f64(p + i), wp);
        vst1q_f64(out + i, vfmaq_n_f64(r, vld1q_f64(q + i), wq));
    }
    for (; i < n; ++i) out[i] = base[i] + wp * p[i] + wq * q[i];
}

void biquad(const BiquadCoefficients& k, const double* in, double* out, std::size_t frames,
            std::size_t channels, double* z1, double* z2) {
    const std::size_t vec_end = channels - channels % 2;
    for (std::size_t f = 0; f < frames; ++f) {
        const double* x = in + f * channels;
        double* y = out + f * channels;
        std::size_t c = 0;
        for (; c < vec_end; c += 2) {
            const float64x2_t xv = vld1q_f64(x + c);
            const float64x2_t yv = vfmaq_n_f64(vld1q_f64(z1 + c), xv, k.b0);
            float64x2_t n1 = vfmaq_n_f64(vld1q_f64(z2 + c), xv, k.b1);
            n1 = vfmsq_n_f64(n1, yv, k.a1);
            float64x2_t n2 = vmulq_n_f64(xv, k.b2);
            n2 = vfmsq_n_f64(n2, yv, k.a2);
            vst1q_f64(z1 + c, n1);
            vst1q_f64(z2 + c, n2);
            vst1q_f64(y + c, yv);
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

const KernelTable* neon_table() {
    static const KernelTable t{Isa::neon, dot, axpy, rotate, blend, biquad};
    return &t;
}

}  // namespace scomo::kernels::detail

#else

namespace scomo::kernels::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace scomo::kernels::detail

#endif
