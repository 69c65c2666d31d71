#include "mmsym/errors.hpp"
#include "mmsym/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace mmsym;
namespace k = mmsym::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-10, 10);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Reassociation bound for a length-n sum of products.
double tolerance(std::size_t n, double magnitude) { return 1e-15 * static_cast<double>(n + 4) * magnitude; }

const std::size_t lengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 1000, 4097};

}  // namespace

TEST_CASE("scalar reference values") {
    std::vector<double> a{1, 2, 3}, b{4, -5, 6};
    CHECK(k::scalar::dot(a.data(), b.data(), 3) == 12);
    CHECK(k::scalar::sum_squares(a.data(), 3) == 14);
    k::scalar::axpy(2, a.data(), b.data(), 3);
    CHECK(b == std::vector<double>{6, -1, 12});
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!k::avx2_available()) {
        MESSAGE("AVX2/FMA not available; skipping");
        return;
    }
    std::mt19937_64 rng(12);
    for (std::size_t n : lengths) {
        CAPTURE(n);
        auto x = random_vector(n, rng), y = random_vector(n, rng);
        double mag = 0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]) + x[i] * x[i];

        CHECK(std::abs(k::avx2::dot(x.data(), y.data(), n) - k::scalar::dot(x.data(), y.data(), n)) <=
              tolerance(n, mag));
        CHECK(std::abs(k::avx2::sum_squares(x.data(), n) - k::scalar::sum_squares(x.data(), n)) <= tolerance(n, mag));

        auto ya = y, ys = y;
        k::avx2::axpy(-0.75, x.data(), ya.data(), n);
        k::scalar::axpy(-0.75, x.data(), ys.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ya[i] - ys[i]) <= 1e-14 * (std::abs(ys[i]) + 10));
    }
}

TEST_CASE("avx2 kernels handle unaligned starts") {
    if (!k::avx2_available()) return;
    std::mt19937_64 rng(13);
    auto x = random_vector(67, rng), y = random_vector(67, rng);
    for (std::size_t off = 0; off < 4; ++off) {
        const std::size_t n = 60;
        CHECK(k::avx2::dot(x.data() + off, y.data() + off, n) ==
              doctest::Approx(k::scalar::dot(x.data() + off, y.data() + off, n)).epsilon(1e-13));
    }
}

TEST_CASE("dispatch follows set_isa") {
    const auto saved = k::active_isa();
    std::vector<double> a{1, 2, 3, 4, 5}, b{1, 1, 1, 1, 1};
    k::set_isa(k::Isa::scalar);
    CHECK(k::active_isa() == k::Isa::scalar);
    CHECK(k::dot(a.data(), b.data(), 5) == 15);
    CHECK(std::string(k::isa_name(k::Isa::scalar)) == "scalar");
    if (k::avx2_available()) {
        k::set_isa(k::Isa::avx2);
        CHECK(k::active_isa() == k::Isa::avx2);
        CHECK(k::dot(a.data(), b.data(), 5) == 15);
        CHECK(k::sum_squares(a.data(), 5) == 55);
    } else {
        CHECK_THROWS_AS(k::set_isa(k::Isa::avx2), InvalidArgument);
    }
    k::set_isa(saved);
}
