#include "scomo/kernels.hpp"

namespace scomo::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

void blend(const double* base, const double* p, double wp, const double* q, double wq,
           double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + wp * p[i] + wq * q[i];
}

void biquad(const BiquadCoefficients& k, const double* in, double* out, std::size_t frames,
            std::size_t channels, double* z1, double* z2) {
    for (std::size_t f = 0; f < frames; ++f) {
        const double* x = in + f * channels;
        double* y = out + f * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            const double xv = x[c];
            const double yv = k.b0 * xv + z1[c];
            z1[c] = k.b1 * xv - k.a1 * yv + z2[c];
            z2[c] = k.b2 * xv - k.a2 * yv;
            y[c] = yv;
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{Isa::scalar, dot, axpy, rotate, blend, biquad};
    return t;
}

}  // namespace scomo::kernels::detail
