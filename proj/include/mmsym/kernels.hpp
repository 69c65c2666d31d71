#pragma once

#include <cstddef>

// Dense double kernels used by the search module. Each has a scalar reference
// and an AVX2/FMA variant; the variant is chosen once at startup from CPUID and
// can be forced with MMSYM_KERNELS=scalar|avx2.
namespace mmsym::kernels {

enum class Isa { scalar, avx2 };

bool avx2_available();
Isa active_isa();
// Throws mmsym::InvalidArgument if the requested variant is not supported here.
void set_isa(Isa isa);
const char* isa_name(Isa isa);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* a, std::size_t n);

namespace scalar {
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* a, std::size_t n);
}  // namespace scalar

namespace avx2 {
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* a, std::size_t n);
}  // namespace avx2

}  // namespace mmsym::kernels
