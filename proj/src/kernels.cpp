#include "mmsym/kernels.hpp"

#include "mmsym/errors.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mmsym::kernels {

namespace scalar {

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_squares(const double* a, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

}  // namespace scalar

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Isa detect() {
    if (const char* env = std::getenv("MMSYM_KERNELS")) {
        std::string v = env;
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2" && avx2_available()) return Isa::avx2;
    }
    return avx2_available() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (isa == Isa::avx2 && !avx2_available()) throw InvalidArgument("AVX2/FMA kernels are not supported on this CPU");
    current().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    if (active_isa() == Isa::avx2)
        avx2::axpy(alpha, x, y, n);
    else
        scalar::axpy(alpha, x, y, n);
}

double dot(const double* a, const double* b, std::size_t n) {
    return active_isa() == Isa::avx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

double sum_squares(const double* a, std::size_t n) {
    return active_isa() == Isa::avx2 ? avx2::sum_squares(a, n) : scalar::sum_squares(a, n);
}

}  // namespace mmsym::kernels
