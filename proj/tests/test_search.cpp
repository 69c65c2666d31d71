#include "mmsym/catalog.hpp"
#include "mmsym/search.hpp"
#include "mmsym/symmetry.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>

using namespace mmsym;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

CyclicFactors random_cyclic(int n, int P, int Q, std::mt19937_64& rng) {
    CyclicFactors f = CyclicFactors::zeros(n, P, Q);
    f.A = random_matrix(n * n, P, rng);
    f.B = random_matrix(n * n, Q, rng);
    f.C = random_matrix(n * n, Q, rng);
    f.D = random_matrix(n * n, Q, rng);
    return f;
}

FactorMatrices random_factors(int n, int R, std::mt19937_64& rng) {
    return {n, random_matrix(n * n, R, rng), random_matrix(n * n, R, rng), random_matrix(n * n, R, rng)};
}

CyclicFactors z4z3_factors() { return cyclic_from_decomposition(to_float(builtin("z4z3"))); }

Matrix& block(CyclicFactors& f, int b) { return b == 0 ? f.A : b == 1 ? f.B : b == 2 ? f.C : f.D; }

double objective_sq(const CyclicFactors& f) {
    double o = objective_cyclic(f);
    return o * o;
}

// Residual T - sum of x_r (x) y_r (x) z_r by plain loops.
std::vector<double> residual_loops(const FactorMatrices& f, const Tensor3<double>& t) {
    const int m = f.m();
    std::vector<double> r(t.data());
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                for (int k = 0; k < f.rank(); ++k) r[(a * m + b) * m + c] -= f.X(a, k) * f.Y(b, k) * f.Z(c, k);
    return r;
}

// Dense regularized least squares for one factor via QR of [K; sqrt(lambda) I].
Matrix als_oracle(const Tensor3<double>& t, const FactorMatrices& f, int s, double lambda, const Matrix& target) {
    const int m = f.m(), R = f.rank();
    const Matrix* mats[3] = {&f.X, &f.Y, &f.Z};
    const Matrix& U = *mats[(s + 1) % 3];
    const Matrix& V = *mats[(s + 2) % 3];
    const int rows = m * m + (lambda > 0 ? R : 0);
    Matrix K = Matrix::Zero(rows, R), rhs = Matrix::Zero(rows, m);
    for (int u = 0; u < m; ++u)
        for (int v = 0; v < m; ++v) {
            for (int r = 0; r < R; ++r) K(u * m + v, r) = U(u, r) * V(v, r);
            for (int own = 0; own < m; ++own) {
                int idx[3];
                idx[s] = own;
                idx[(s + 1) % 3] = u;
                idx[(s + 2) % 3] = v;
                rhs(u * m + v, own) = t.at(idx[0], idx[1], idx[2]);
            }
        }
    if (lambda > 0)
        for (int r = 0; r < R; ++r) {
            K(m * m + r, r) = std::sqrt(lambda);
            for (int own = 0; own < m; ++own) rhs(m * m + r, own) = std::sqrt(lambda) * target(own, r);
        }
    return K.colPivHouseholderQr().solve(rhs).transpose();
}

Tensor3<double> random_tensor(int m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1, 1);
    Tensor3<double> t(m);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

}  // namespace

TEST_CASE("objective examples") {
    auto s3 = from_decomposition(to_float(builtin("standard3")));
    CHECK(objective_full(s3) <= 1e-12);
    CHECK(objective_full(FactorMatrices{3, Matrix::Zero(9, 4), Matrix::Zero(9, 4), Matrix::Zero(9, 4)}) ==
          doctest::Approx(std::sqrt(27.0)).epsilon(1e-15));
    auto z = z4z3_factors();
    CHECK(z.P == 11);
    CHECK(z.Q == 4);
    CHECK(objective_cyclic(z) <= 1e-12);
    CHECK(objective_cyclic(CyclicFactors::zeros(2, 1, 2)) == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("objective_cyclic equals objective_full of the assembled factors") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 2, P = trial % 3, Q = 1 + trial % 4;
        auto f = random_cyclic(n, P, Q, rng);
        CHECK(std::abs(objective_cyclic(f) - objective_full(assemble(f))) <= 1e-12);
        // Loop oracle for the objective itself.
        double s = 0;
        for (double v : residual_loops(assemble(f), matmul_tensor<double>(n))) s += v * v;
        CHECK(std::abs(objective_full(assemble(f)) - std::sqrt(s)) <= 1e-12 * (1 + std::sqrt(s)));
    }
}

TEST_CASE("assembled cyclic factors give a cyclically invariant tensor") {
    std::mt19937_64 rng(2);
    auto f = random_cyclic(2, 2, 3, rng);
    auto t = reconstruct(assemble(f));
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) CHECK(t.at(a, b, c) == doctest::Approx(t.at(c, a, b)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(3);
    const double h = 1e-5;
    for (auto [n, P, Q] : {std::array<int, 3>{2, 1, 2}, std::array<int, 3>{3, 11, 4}}) {
        CAPTURE(n);
        for (int point = 0; point < 10; ++point) {
            auto f = random_cyclic(n, P, Q, rng);
            auto g = gradient_cyclic(f);
            double worst = 0;
            for (int b = 0; b < 4; ++b) {
                Matrix& mb = block(f, b);
                const Matrix& gb = block(g, b);
                for (Eigen::Index i = 0; i < mb.size(); ++i) {
                    const double x0 = mb.data()[i];
                    mb.data()[i] = x0 + h;
                    double fp = objective_sq(f);
                    mb.data()[i] = x0 - h;
                    double fm = objective_sq(f);
                    mb.data()[i] = x0;
                    const double fd = (fp - fm) / (2 * h);
                    worst = std::max(worst, std::abs(fd - gb.data()[i]) / std::max(std::abs(gb.data()[i]), 1.0));
                }
            }
            CHECK(worst <= 1e-5);
        }
    }
}

TEST_CASE("gradient vanishes at an exact decomposition") {
    auto g = gradient_cyclic(z4z3_factors());
    double s = g.A.squaredNorm() + g.B.squaredNorm() + g.C.squaredNorm() + g.D.squaredNorm();
    CHECK(std::sqrt(s) <= 1e-9);
}

TEST_CASE("A-block gradient with Q = 0 is the symmetric CP gradient") {
    std::mt19937_64 rng(4);
    const int n = 2, m = 4, P = 3;
    auto f = random_cyclic(n, P, 0, rng);
    auto g = gradient_cyclic(f);
    auto r = residual_loops(assemble(f), matmul_tensor<double>(n));
    auto R = [&](int a, int b, int c) { return r[(a * m + b) * m + c]; };
    for (int p = 0; p < P; ++p)
        for (int i = 0; i < m; ++i) {
            double expect = 0;
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c) {
                    const double w = f.A(b, p) * f.A(c, p);
                    expect += R(i, b, c) * w + R(b, i, c) * w + R(b, c, i) * w;
                }
            CHECK(g.A(i, p) == doctest::Approx(-2 * expect).epsilon(1e-10));
        }
}

TEST_CASE("phase 1") {
    SUBCASE("fits the scalar for n = 1") {
        auto res = phase1_optimize(1, 1, 1, 0, 0);
        CHECK(res.objective <= 1e-8);
    }
    SUBCASE("best-so-far trace is non-increasing and the run is deterministic") {
        Phase1Options opts;
        opts.max_iterations = 60;
        auto a = phase1_optimize(2, 7, 1, 2, 11, opts);
        auto b = phase1_optimize(2, 7, 1, 2, 11, opts);
        REQUIRE(!a.trace.empty());
        for (size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i] <= a.trace[i - 1]);
        CHECK(a.trace == b.trace);
        CHECK(a.factors.A == b.factors.A);
        CHECK(a.objective == doctest::Approx(objective_cyclic(a.factors)).epsilon(1e-12));
        const double lim = opts.max_abs;
        for (const Matrix* m : {&a.factors.A, &a.factors.B, &a.factors.C, &a.factors.D})
            CHECK(m->cwiseAbs().maxCoeff() <= lim);
    }
    SUBCASE("n = 3, R = 23 descends") {
        Phase1Options opts;
        opts.max_iterations = 15;
        auto res = phase1_optimize(3, 23, 11, 4, 5, opts);
        for (size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
        CHECK(res.objective < objective_cyclic(SessionState::random(3, 11, 4, 5).cyclic()));
    }
    SUBCASE("invalid layout") {
        CHECK_THROWS_AS(phase1_optimize(2, 7, 2, 2, 0), InvalidArgument);
    }
}

TEST_CASE("build_targets") {
    Matrix x(1, 3);
    x << 0.3, -1.7, 0.01;
    Matrix t = build_targets(x, 1);
    CHECK(t(0, 0) == 0.3);
    CHECK(t(0, 1) == -1.0);
    CHECK(t(0, 2) == 0.0);

    std::mt19937_64 rng(5);
    Matrix y = random_matrix(9, 5, rng);
    CHECK(build_targets(y, 0) == y);
    CHECK(build_targets(y, 45).isZero(0));

    Matrix ties = Matrix::Constant(2, 2, 0.5);
    Matrix tt = build_targets(ties, 2);
    CHECK(tt(0, 0) == 0);
    CHECK(tt(0, 1) == 0);
    CHECK(tt(1, 0) == 0.5);

    for (int z : {0, 7, 20, 44}) {
        Matrix w = random_matrix(9, 5, rng, 2.0);
        Matrix once = build_targets(w, z);
        CHECK(build_targets(once, z) == once);
        CHECK(static_cast<int>((once.array() == 0).count()) >= z);
    }
    CHECK_THROWS_AS(build_targets(y, 46), InvalidArgument);
}

TEST_CASE("ALS update") {
    std::mt19937_64 rng(6);
    SUBCASE("rank-one tensor is fit exactly") {
        const int n = 2, m = 4;
        Matrix a = random_matrix(m, 1, rng), b = random_matrix(m, 1, rng), c = random_matrix(m, 1, rng);
        Tensor3<double> t(m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k) t.at(i, j, k) = a(i) * b(j) * c(k);
        FactorMatrices f{n, random_matrix(m, 1, rng), b, c};
        f.X = als_update(t, f, Slot::X, 0, Matrix::Zero(m, 1));
        CHECK(objective_full(f, t) <= 1e-12);
    }
    SUBCASE("agrees with a dense least-squares oracle") {
        for (int trial = 0; trial < 6; ++trial) {
            auto f = random_factors(2, 5, rng);
            auto t = random_tensor(4, rng);
            auto target = random_matrix(4, 5, rng);
            const int s = trial % 3;
            const double lambda = trial < 3 ? 0.0 : 0.3;
            Matrix got = als_update(t, f, static_cast<Slot>(s), lambda, target);
            Matrix want = als_oracle(t, f, s, lambda, target);
            CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
    SUBCASE("large lambda pins the factor to the target") {
        auto f = random_factors(2, 7, rng);
        auto target = random_matrix(4, 7, rng);
        Matrix x = als_update(f, Slot::Y, 1e8, target);
        CHECK((x - target).cwiseAbs().maxCoeff() <= 1e-4);
    }
    SUBCASE("lambda = 0 never increases the objective") {
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + trial % 2, R = n == 2 ? 5 : 12;
            auto f = random_factors(n, R, rng);
            auto t = random_tensor(n * n, rng);
            const Slot slot = static_cast<Slot>(trial % 3);
            const double before = std::pow(objective_full(f, t), 2);
            Matrix upd = als_update(t, f, slot, 0, Matrix::Zero(n * n, R));
            (slot == Slot::X ? f.X : slot == Slot::Y ? f.Y : f.Z) = upd;
            const double after = std::pow(objective_full(f, t), 2);
            CHECK(after <= before + 1e-10);
        }
    }
    SUBCASE("singular system at lambda = 0") {
        auto f = random_factors(2, 3, rng);
        f.Y.setZero();
        CHECK_THROWS_AS(als_update(f, Slot::X, 0, Matrix::Zero(4, 3)), SingularError);
        CHECK_NOTHROW(als_update(f, Slot::X, 0.1, Matrix::Zero(4, 3)));
        CHECK_THROWS_AS(als_update(f, Slot::X, -1, Matrix::Zero(4, 3)), InvalidArgument);
    }
}

TEST_CASE("cyclic projection") {
    std::mt19937_64 rng(7);
    SUBCASE("projection of assembled factors is the identity, bit for bit") {
        auto f = random_cyclic(3, 5, 6, rng);
        auto p = cyclic_project(assemble(f), 5, 6);
        CHECK(p.A == f.A);
        CHECK(p.B == f.B);
        CHECK(p.C == f.C);
        CHECK(p.D == f.D);
    }
    SUBCASE("three copies are averaged") {
        auto f = random_cyclic(2, 1, 1, rng);
        auto x = assemble(f);
        const double eps = 1e-3;
        x.Y(0, 0) += eps;
        x.Z(0, 0) -= eps;
        auto p = cyclic_project(x, 1, 1);
        CHECK(p.A(0, 0) == doctest::Approx(f.A(0, 0)).epsilon(1e-14));
    }
    SUBCASE("assemble o project is idempotent") {
        auto x = random_factors(2, 7, rng);
        auto once = assemble(cyclic_project(x, 1, 2));
        auto twice = assemble(cyclic_project(once, 1, 2));
        CHECK(once.X == twice.X);
        CHECK(once.Y == twice.Y);
        CHECK(once.Z == twice.Z);
    }
    SUBCASE("layout mismatch") {
        CHECK_THROWS_AS(cyclic_project(random_factors(2, 7, rng), 2, 2), InvalidArgument);
    }
    SUBCASE("decomposition conversions") {
        auto z = builtin("z4z3");
        auto f = z4z3_factors();
        auto back = to_decomposition(assemble(f));
        CHECK(back.rank() == 23);
        CHECK(residual(back).norm_sq == 0.0);
        auto missing = to_float(z);
        missing.terms.erase(missing.terms.begin() + 22);
        bool removed_cube = missing.terms.size() == 22 && !to_float(z).terms[22].is_cube();
        if (removed_cube) CHECK_THROWS_AS(cyclic_from_decomposition(missing), InvalidArgument);
    }
}

TEST_CASE("rounding") {
    auto values = default_value_set();
    auto exact = z4z3_factors();
    SUBCASE("entries close to the value set round to the exact decomposition") {
        std::mt19937_64 rng(8);
        auto f = exact;
        for (int b = 0; b < 4; ++b) block(f, b) += random_matrix(9, static_cast<int>(block(f, b).cols()), rng, 1e-3);
        auto r = round_decomposition(f, values);
        REQUIRE(r.success);
        REQUIRE(r.decomposition.has_value());
        CHECK(r.residual_norm_sq == 0);
        CHECK(decompositions_equal(*r.decomposition, builtin("z4z3")));
    }
    SUBCASE("an entry far from the value set is named") {
        auto f = exact;
        f.B(3, 1) = 0.5;
        auto r = round_decomposition(f, values, 0.05);
        CHECK_FALSE(r.success);
        REQUIRE(r.offending.size() == 1);
        CHECK(r.offending[0].block == 'B');
        CHECK(r.offending[0].row == 3);
        CHECK(r.offending[0].col == 1);
        CHECK(r.message.find("B(3,1)") != std::string::npos);
    }
    SUBCASE("perturbing by twice the tolerance fails") {
        auto f = exact;
        const double tol = 1e-2;
        f.A(0, 0) += 2 * tol;
        CHECK_FALSE(round_decomposition(f, values, tol).success);
    }
    SUBCASE("a zero column drops its terms and leaves a residual") {
        auto f = exact;
        f.A.col(0).setZero();
        auto r = round_decomposition(f, values);
        CHECK_FALSE(r.success);
        CHECK(r.residual_norm_sq > 0);
        auto allowed = round_decomposition(f, values, 1e-2, true);
        REQUIRE(allowed.decomposition.has_value());
        CHECK(allowed.dropped_terms == 1);
        CHECK(allowed.decomposition->rank() == 22);
        CHECK_FALSE(allowed.success);
    }
    SUBCASE("tolerance must stay below half the smallest gap") {
        CHECK_THROWS_AS(round_decomposition(exact, values, 0.5), InvalidArgument);
        CHECK_THROWS_AS(round_decomposition(exact, parse_value_set("0,1/2,1"), 0.25), InvalidArgument);
        CHECK_NOTHROW(check_round_tolerance(parse_value_set("0,1/2,1"), 0.2));
        CHECK_THROWS_AS(check_round_tolerance(values, 0), InvalidArgument);
    }
    SUBCASE("value sets") {
        auto v = parse_value_set(" 0, 1,-1 ,1/2");
        CHECK(v == std::vector<Rational>{Rational(0), Rational(1), Rational(-1), Rational(1, 2)});
        CHECK_THROWS_AS(parse_value_set(","), InvalidArgument);
        CHECK_THROWS_AS(parse_value_set("0,x"), ParseError);
    }
}

TEST_CASE("factor files round-trip bit for bit") {
    std::mt19937_64 rng(9);
    auto f = random_cyclic(3, 2, 3, rng);
    f.A(0, 0) = -0.0;
    f.B(1, 1) = std::nextafter(1.0, 2.0);
    f.C(2, 2) = 1e-310;
    auto back = parse_factors(serialize_factors(f));
    CHECK(back.n == 3);
    CHECK(back.P == 2);
    CHECK(back.Q == 3);
    for (int b = 0; b < 4; ++b) {
        const Matrix& x = block(f, b);
        const Matrix& y = block(back, b);
        REQUIRE(x.rows() == y.rows());
        REQUIRE(x.cols() == y.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            CHECK(std::bit_cast<std::uint64_t>(x.data()[i]) == std::bit_cast<std::uint64_t>(y.data()[i]));
    }
    auto empty = parse_factors(serialize_factors(CyclicFactors::zeros(2, 0, 0)));
    CHECK(empty.rank() == 0);
    CHECK_THROWS_AS(parse_factors("{}"), ParseError);
    CHECK_THROWS_AS(parse_factors("not json"), ParseError);
    auto text = serialize_factors(f);
    text.replace(text.find("\"0x"), 3, "\"0y");
    CHECK_THROWS_AS(parse_factors(text), ParseError);
}

TEST_CASE("batch search bookkeeping") {
    SearchOptions opts;
    opts.restarts = 0;
    CHECK(search(opts).restarts.empty());
    opts.restarts = 3;
    opts.phase1.max_iterations = 2;
    opts.schedule = {};
    opts.jobs = 2;
    auto rep = search(opts);
    REQUIRE(rep.restarts.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(rep.restarts[i].seed == i);
    REQUIRE(rep.best.has_value());
    for (const auto& r : rep.restarts) CHECK(rep.restarts[*rep.best].final_objective <= r.final_objective);
    opts.R = 8;
    CHECK_THROWS_AS(search(opts), InvalidArgument);
}
