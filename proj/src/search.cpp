#include "mmsym/search.hpp"

#include "mmsym/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace mmsym {

namespace {

// Block order along the columns of X, Y, Z: X = (A B C D), Y = (A D B C), Z = (A C D B).
// position[slot][block] is the block's position within that factor.
constexpr int position[3][4] = {{0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}};

int block_offset(int slot, int block, int P, int Q) {
    int p = position[slot][block];
    return p == 0 ? 0 : P + (p - 1) * Q;
}

int block_width(int block, int P, int Q) { return block == 0 ? P : Q; }

Matrix& block_ref(CyclicFactors& f, int b) {
    switch (b) {
        case 0: return f.A;
        case 1: return f.B;
        case 2: return f.C;
        default: return f.D;
    }
}

const Matrix& block_ref(const CyclicFactors& f, int b) { return block_ref(const_cast<CyclicFactors&>(f), b); }

Matrix& slot_ref(FactorMatrices& f, int s) { return s == 0 ? f.X : s == 1 ? f.Y : f.Z; }
const Matrix& slot_ref(const FactorMatrices& f, int s) { return s == 0 ? f.X : s == 1 ? f.Y : f.Z; }

void check_layout(const CyclicFactors& f) {
    if (f.n < 1 || f.P < 0 || f.Q < 0) throw InvalidArgument("cyclic factors: invalid n, P or Q");
    for (int b = 0; b < 4; ++b) {
        const Matrix& mb = block_ref(f, b);
        if (mb.rows() != f.m() || mb.cols() != block_width(b, f.P, f.Q))
            throw InvalidArgument("cyclic factors: block shape does not match n, P, Q");
    }
}

void check_shapes(const FactorMatrices& f) {
    if (f.n < 1) throw InvalidArgument("factor matrices: n must be positive");
    const int m = f.m();
    if (f.X.rows() != m || f.Y.rows() != m || f.Z.rows() != m)
        throw InvalidArgument("factor matrices: row count must be n^2");
    if (f.X.cols() != f.Y.cols() || f.X.cols() != f.Z.cols())
        throw InvalidArgument("factor matrices: X, Y, Z must have the same number of columns");
}

const Tensor3<double>& matmul_double(int n) {
    static thread_local std::map<int, Tensor3<double>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, matmul_tensor<double>(n)).first;
    return it->second;
}

struct Entry {
    int a, b, c;
    double v;
};

std::vector<Entry> nonzeros(const Tensor3<double>& t) {
    std::vector<Entry> out;
    const int m = t.m();
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                if (t.at(a, b, c) != 0) out.push_back({a, b, c, t.at(a, b, c)});
    return out;
}

}  // namespace

CyclicFactors CyclicFactors::zeros(int n, int P, int Q) {
    if (n < 1 || P < 0 || Q < 0) throw InvalidArgument("cyclic factors: invalid n, P or Q");
    const int m = n * n;
    return {n, P, Q, Matrix::Zero(m, P), Matrix::Zero(m, Q), Matrix::Zero(m, Q), Matrix::Zero(m, Q)};
}

void check_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

FactorMatrices assemble(const CyclicFactors& f) {
    check_layout(f);
    const int R = f.rank();
    FactorMatrices out{f.n, Matrix(f.m(), R), Matrix(f.m(), R), Matrix(f.m(), R)};
    for (int s = 0; s < 3; ++s)
        for (int b = 0; b < 4; ++b) {
            int w = block_width(b, f.P, f.Q);
            if (w) slot_ref(out, s).middleCols(block_offset(s, b, f.P, f.Q), w) = block_ref(f, b);
        }
    return out;
}

CyclicFactors cyclic_project(const FactorMatrices& f, int P, int Q) {
    check_shapes(f);
    if (P < 0 || Q < 0 || P + 3 * Q != f.rank())
        throw InvalidArgument("cyclic_project: P + 3Q = " + std::to_string(P + 3 * Q) + " but R = " +
                              std::to_string(f.rank()));
    CyclicFactors out = CyclicFactors::zeros(f.n, P, Q);
    for (int b = 0; b < 4; ++b) {
        const int w = block_width(b, P, Q);
        if (!w) continue;
        Matrix& dst = block_ref(out, b);
        auto x = f.X.middleCols(block_offset(0, b, P, Q), w);
        auto y = f.Y.middleCols(block_offset(1, b, P, Q), w);
        auto z = f.Z.middleCols(block_offset(2, b, P, Q), w);
        for (int j = 0; j < w; ++j)
            for (int i = 0; i < f.m(); ++i) {
                double a = x(i, j), c = y(i, j), d = z(i, j);
                // Agreeing copies are kept bit-for-bit so projection is idempotent.
                dst(i, j) = (a == c && c == d) ? a : (a + c + d) / 3.0;
            }
    }
    return out;
}

FactorMatrices from_decomposition(const FloatDecomposition& dec) {
    validate(dec);
    const int m = dec.n * dec.n, R = dec.rank();
    FactorMatrices f{dec.n, Matrix(m, R), Matrix(m, R), Matrix(m, R)};
    for (int r = 0; r < R; ++r)
        for (int a = 0; a < m; ++a) {
            f.X(a, r) = dec.terms[r].x[a];
            f.Y(a, r) = dec.terms[r].y[a];
            f.Z(a, r) = dec.terms[r].z[a];
        }
    return f;
}

CyclicFactors cyclic_from_decomposition(const FloatDecomposition& dec) {
    validate(dec);
    const int m = dec.n * dec.n;
    std::vector<int> cubes;
    std::vector<std::array<int, 3>> orbits;
    std::vector<char> used(dec.terms.size(), 0);
    auto same = [](const Mat<double>& a, const Mat<double>& b) { return a == b; };
    for (size_t i = 0; i < dec.terms.size(); ++i) {
        if (used[i]) continue;
        const auto& t = dec.terms[i];
        if (t.is_cube()) {
            cubes.push_back(static_cast<int>(i));
            used[i] = 1;
            continue;
        }
        // Partners (z, x, y) and (y, z, x).
        int j1 = -1, j2 = -1;
        for (size_t j = 0; j < dec.terms.size(); ++j) {
            if (used[j] || j == i) continue;
            const auto& u = dec.terms[j];
            if (j1 < 0 && same(u.x, t.z) && same(u.y, t.x) && same(u.z, t.y))
                j1 = static_cast<int>(j);
            else if (j2 < 0 && same(u.x, t.y) && same(u.y, t.z) && same(u.z, t.x))
                j2 = static_cast<int>(j);
        }
        if (j1 < 0 || j2 < 0)
            throw InvalidArgument("term " + std::to_string(i) + " has no complete cyclic orbit in the decomposition");
        used[i] = used[j1] = used[j2] = 1;
        orbits.push_back({static_cast<int>(i), j1, j2});
    }
    CyclicFactors f = CyclicFactors::zeros(dec.n, static_cast<int>(cubes.size()), static_cast<int>(orbits.size()));
    for (size_t p = 0; p < cubes.size(); ++p)
        for (int a = 0; a < m; ++a) f.A(a, p) = dec.terms[cubes[p]].x[a];
    for (size_t q = 0; q < orbits.size(); ++q) {
        const auto& t = dec.terms[orbits[q][0]];  // (B, D, C)
        for (int a = 0; a < m; ++a) {
            f.B(a, q) = t.x[a];
            f.D(a, q) = t.y[a];
            f.C(a, q) = t.z[a];
        }
    }
    return f;
}

FloatDecomposition to_decomposition(const FactorMatrices& f) {
    check_shapes(f);
    FloatDecomposition d;
    d.n = f.n;
    const int m = f.m();
    for (int r = 0; r < f.rank(); ++r) {
        auto col = [&](const Matrix& M) {
            std::vector<double> e(m);
            for (int a = 0; a < m; ++a) e[a] = M(a, r);
            return Mat<double>(f.n, std::move(e));
        };
        d.terms.push_back({col(f.X), col(f.Y), col(f.Z)});
    }
    return d;
}

Tensor3<double> reconstruct(const FactorMatrices& f) {
    check_shapes(f);
    const int m = f.m();
    Tensor3<double> t(m);
    for (int r = 0; r < f.rank(); ++r) {
        const double* z = f.Z.col(r).data();
        for (int a = 0; a < m; ++a) {
            double xa = f.X(a, r);
            if (xa == 0) continue;
            for (int b = 0; b < m; ++b) {
                double c = xa * f.Y(b, r);
                if (c == 0) continue;
                kernels::axpy(c, z, &t.at(a, b, 0), m);
            }
        }
    }
    return t;
}

namespace {

// target - reconstruction
Tensor3<double> residual_tensor(const FactorMatrices& f, const Tensor3<double>& target) {
    Tensor3<double> e = reconstruct(f);
    if (e.m() != target.m()) throw DimensionError("objective: target tensor size mismatch");
    auto& d = e.data();
    const auto& t = target.data();
    for (size_t i = 0; i < d.size(); ++i) d[i] = t[i] - d[i];
    return e;
}

}  // namespace

double objective_full(const FactorMatrices& f, const Tensor3<double>& target) {
    check_finite(f.X, "X");
    check_finite(f.Y, "Y");
    check_finite(f.Z, "Z");
    Tensor3<double> e = residual_tensor(f, target);
    return std::sqrt(kernels::sum_squares(e.data().data(), e.data().size()));
}

double objective_full(const FactorMatrices& f) { return objective_full(f, matmul_double(f.n)); }

double objective_cyclic(const CyclicFactors& f) { return objective_full(assemble(f)); }

CyclicFactors gradient_cyclic(const CyclicFactors& f) {
    FactorMatrices xyz = assemble(f);
    for (int s = 0; s < 3; ++s) check_finite(slot_ref(xyz, s), "factors");
    const int m = f.m(), R = f.rank();
    Tensor3<double> e = residual_tensor(xyz, matmul_double(f.n));
    Matrix gx = Matrix::Zero(m, R), gy = Matrix::Zero(m, R), gz = Matrix::Zero(m, R);
    for (int r = 0; r < R; ++r) {
        const double* z = xyz.Z.col(r).data();
        double* gzr = gz.col(r).data();
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const double* row = &e.at(a, b, 0);
                double w = kernels::dot(row, z, m);
                gx(a, r) -= 2 * xyz.Y(b, r) * w;
                gy(b, r) -= 2 * xyz.X(a, r) * w;
                kernels::axpy(-2 * xyz.X(a, r) * xyz.Y(b, r), row, gzr, m);
            }
    }
    CyclicFactors g = CyclicFactors::zeros(f.n, f.P, f.Q);
    const Matrix* gs[3] = {&gx, &gy, &gz};
    for (int b = 0; b < 4; ++b) {
        int w = block_width(b, f.P, f.Q);
        if (!w) continue;
        for (int s = 0; s < 3; ++s) block_ref(g, b) += gs[s]->middleCols(block_offset(s, b, f.P, f.Q), w);
    }
    return g;
}

// ---- phase 1 ---------------------------------------------------------------

namespace {

Eigen::VectorXd pack(const CyclicFactors& f) {
    const int m = f.m();
    Eigen::VectorXd v(m * f.rank());
    int off = 0;
    for (int b = 0; b < 4; ++b) {
        const Matrix& mb = block_ref(f, b);
        v.segment(off, mb.size()) = Eigen::Map<const Eigen::VectorXd>(mb.data(), mb.size());
        off += static_cast<int>(mb.size());
    }
    return v;
}

void unpack(const Eigen::VectorXd& v, CyclicFactors& f) {
    int off = 0;
    for (int b = 0; b < 4; ++b) {
        Matrix& mb = block_ref(f, b);
        Eigen::Map<Eigen::VectorXd>(mb.data(), mb.size()) = v.segment(off, mb.size());
        off += static_cast<int>(mb.size());
    }
}

// Residual r = vec(M - reconstruction) and its Jacobian with respect to the packed parameters.
void residual_jacobian(const CyclicFactors& f, Eigen::VectorXd& r, Matrix& J) {
    const int m = f.m(), m2 = m * m;
    FactorMatrices xyz = assemble(f);
    Tensor3<double> e = residual_tensor(xyz, matmul_double(f.n));
    r = Eigen::Map<const Eigen::VectorXd>(e.data().data(), e.data().size());
    J.setZero(static_cast<Eigen::Index>(m) * m2, m * f.rank());
    int param = 0;
    for (int b = 0; b < 4; ++b) {
        const int w = block_width(b, f.P, f.Q);
        for (int q = 0; q < w; ++q)
            for (int i = 0; i < m; ++i, ++param) {
                double* col = J.col(param).data();
                for (int s = 0; s < 3; ++s) {
                    const int c = block_offset(s, b, f.P, f.Q) + q;
                    const double* x = xyz.X.col(c).data();
                    const double* y = xyz.Y.col(c).data();
                    const double* z = xyz.Z.col(c).data();
                    // d(reconstruction)/d(slot s entry i) = outer product with e_i in slot s
                    if (s == 0) {
                        for (int bb = 0; bb < m; ++bb) kernels::axpy(-y[bb], z, col + i * m2 + bb * m, m);
                    } else if (s == 1) {
                        for (int a = 0; a < m; ++a) kernels::axpy(-x[a], z, col + a * m2 + i * m, m);
                    } else {
                        for (int a = 0; a < m; ++a)
                            for (int bb = 0; bb < m; ++bb) col[a * m2 + bb * m + i] -= x[a] * y[bb];
                    }
                }
            }
    }
}

}  // namespace

Phase1Result phase1_optimize(int n, int R, int P, int Q, std::uint64_t seed, const Phase1Options& opts,
                             std::stop_token stop) {
    if (n < 1) throw InvalidArgument("phase1: n must be positive");
    if (P < 0 || Q < 0 || P + 3 * Q != R)
        throw InvalidArgument("phase1: P + 3Q must equal R (got P=" + std::to_string(P) + ", Q=" + std::to_string(Q) +
                              ", R=" + std::to_string(R) + ")");
    if (!(opts.max_abs > 0)) throw InvalidArgument("phase1: max_abs must be positive");
    SessionState init = SessionState::random(n, P, Q, seed);
    CyclicFactors f = init.cyclic();
    for (int b = 0; b < 4; ++b) block_ref(f, b) *= opts.max_abs;

    Phase1Result res;
    Eigen::VectorXd theta = pack(f), r;
    Matrix J;
    residual_jacobian(f, r, J);
    double fval = r.squaredNorm();
    double mu = 1e-2;
    const Eigen::Index np = theta.size();
    CyclicFactors trial = f;
    for (int it = 0; it < opts.max_iterations; ++it) {
        if (stop.stop_requested() || std::sqrt(fval) <= opts.target) break;
        Matrix H = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        while (mu <= 1e12) {
            Matrix A = H;
            for (Eigen::Index i = 0; i < np; ++i) A(i, i) += mu * (H(i, i) + 1e-9) + mu * 1e-6;
            Eigen::VectorXd step = A.ldlt().solve(-g);
            Eigen::VectorXd cand = (theta + step).cwiseMax(-opts.max_abs).cwiseMin(opts.max_abs);
            unpack(cand, trial);
            Eigen::VectorXd rc;
            Matrix Jc;
            residual_jacobian(trial, rc, Jc);
            double fc = rc.squaredNorm();
            if (std::isfinite(fc) && fc < fval) {
                theta = std::move(cand);
                r = std::move(rc);
                J = std::move(Jc);
                fval = fc;
                mu = std::max(mu / 3, 1e-12);
                improved = true;
                break;
            }
            mu *= 4;
        }
        res.iterations = it + 1;
        res.trace.push_back(std::sqrt(fval));
        if (!improved) break;
    }
    unpack(theta, f);
    res.factors = std::move(f);
    res.objective = std::sqrt(fval);
    return res;
}

// ---- phase 2 ---------------------------------------------------------------

Matrix build_targets(const Matrix& x, int zeros, double max_abs) {
    if (zeros < 0 || zeros > x.size()) throw InvalidArgument("build_targets: zeros exceeds the entry count");
    if (!(max_abs > 0)) throw InvalidArgument("build_targets: max_abs must be positive");
    check_finite(x, "build_targets");
    Matrix t = x;
    for (Eigen::Index j = 0; j < t.cols(); ++j)
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            if (std::abs(t(i, j)) > max_abs) t(i, j) = std::copysign(max_abs, t(i, j));
    if (zeros == 0) return t;
    struct Key {
        double mag;
        Eigen::Index row, col;
    };
    std::vector<Key> keys;
    keys.reserve(t.size());
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j) keys.push_back({std::abs(t(i, j)), i, j});
    std::partial_sort(keys.begin(), keys.begin() + zeros, keys.end(), [](const Key& a, const Key& b) {
        if (a.mag != b.mag) return a.mag < b.mag;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });
    for (int k = 0; k < zeros; ++k) t(keys[k].row, keys[k].col) = 0;
    return t;
}

Matrix als_update(const Tensor3<double>& t, const FactorMatrices& f, Slot slot, double lambda, const Matrix& target) {
    check_shapes(f);
    if (t.m() != f.m()) throw DimensionError("als_update: tensor size mismatch");
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidArgument("als_update: lambda must be >= 0");
    const int m = f.m(), R = f.rank();
    if (target.rows() != m || target.cols() != R) throw InvalidArgument("als_update: target shape mismatch");
    const int s = static_cast<int>(slot);
    const Matrix& U = slot_ref(f, (s + 1) % 3);  // the two other factors, in slot order
    const Matrix& V = slot_ref(f, (s + 2) % 3);
    Matrix G = (U.transpose() * U).cwiseProduct(V.transpose() * V);
    Matrix rhs = Matrix::Zero(m, R);
    for (const auto& e : nonzeros(t)) {
        int idx[3] = {e.a, e.b, e.c};
        int own = idx[s], iu = idx[(s + 1) % 3], iv = idx[(s + 2) % 3];
        for (int r = 0; r < R; ++r) rhs(own, r) += e.v * U(iu, r) * V(iv, r);
    }
    if (lambda > 0) {
        rhs += lambda * target;
        G.diagonal().array() += lambda;
    }
    if (lambda > 0) {
        Eigen::LLT<Matrix> llt(G);
        if (llt.info() == Eigen::Success) return llt.solve(rhs.transpose()).transpose();
    }
    Eigen::FullPivLU<Matrix> lu(G);
    if (lu.rank() < R)
        throw SingularError("als_update: normal equations are singular; use a positive lambda");
    return lu.solve(rhs.transpose()).transpose();
}

Matrix als_update(const FactorMatrices& f, Slot slot, double lambda, const Matrix& target) {
    return als_update(matmul_double(f.n), f, slot, lambda, target);
}

// ---- rounding --------------------------------------------------------------

std::vector<Rational> default_value_set() { return {Rational(0), Rational(1), Rational(-1)}; }

std::vector<Rational> parse_value_set(const std::string& csv) {
    std::vector<Rational> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        if (item.empty()) continue;
        out.push_back(parse_rational(item));
    }
    if (out.empty()) throw InvalidArgument("value set is empty");
    return out;
}

void check_round_tolerance(const std::vector<Rational>& values_in, double tol) {
    if (values_in.empty()) throw InvalidArgument("round: empty value set");
    std::vector<Rational> values = values_in;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    double min_gap = INFINITY;
    for (size_t i = 1; i < values.size(); ++i) min_gap = std::min(min_gap, Rational(values[i] - values[i - 1]).get_d());
    if (!(tol > 0) || !(tol < min_gap / 2))
        throw InvalidArgument("round: tol must be positive and below half the smallest gap of the value set");
}

RoundResult round_decomposition(const CyclicFactors& f, const std::vector<Rational>& values_in, double tol,
                                bool allow_nonzero) {
    check_layout(f);
    check_round_tolerance(values_in, tol);
    std::vector<Rational> values = values_in;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> vd;
    for (const auto& v : values) vd.push_back(v.get_d());

    RoundResult res;
    std::vector<std::vector<Rational>> exact(4);
    const char names[4] = {'A', 'B', 'C', 'D'};
    for (int b = 0; b < 4; ++b) {
        const Matrix& mb = block_ref(f, b);
        exact[b].resize(mb.size());
        for (Eigen::Index j = 0; j < mb.cols(); ++j)
            for (Eigen::Index i = 0; i < mb.rows(); ++i) {
                double e = mb(i, j);
                size_t best = 0;
                double bd = INFINITY;
                for (size_t k = 0; k < vd.size(); ++k)
                    if (std::abs(e - vd[k]) < bd) bd = std::abs(e - vd[k]), best = k;
                if (!(bd <= tol)) {
                    res.offending.push_back({names[b], static_cast<int>(i), static_cast<int>(j), e});
                    continue;
                }
                exact[b][j * mb.rows() + i] = values[best];
            }
    }
    if (!res.offending.empty()) {
        std::ostringstream os;
        os << res.offending.size() << " entries are not within " << tol << " of the value set; first: "
           << res.offending[0].block << "(" << res.offending[0].row << "," << res.offending[0].col
           << ") = " << res.offending[0].value;
        res.message = os.str();
        return res;
    }
    const int m = f.m();
    ExactDecomposition dec;
    dec.n = f.n;
    dec.name = "rounded";
    auto column = [&](int b, int j) {
        std::vector<Rational> e(m);
        for (int a = 0; a < m; ++a) e[a] = exact[b][j * m + a];
        return Mat<Rational>(f.n, std::move(e));
    };
    const int P = f.P, Q = f.Q;
    for (int p = 0; p < P; ++p) {
        auto a = column(0, p);
        if (a.is_zero()) {
            ++res.dropped_terms;
            continue;
        }
        dec.terms.push_back({a, a, a});
    }
    for (int q = 0; q < Q; ++q) {
        auto B = column(1, q), C = column(2, q), D = column(3, q);
        if (B.is_zero() || C.is_zero() || D.is_zero()) {
            res.dropped_terms += 3;
            continue;
        }
        dec.terms.push_back({B, D, C});
        dec.terms.push_back({C, B, D});
        dec.terms.push_back({D, C, B});
    }
    res.residual_norm_sq = residual(dec).norm_sq;
    if (res.residual_norm_sq != 0 && !allow_nonzero) {
        res.message = "rounded decomposition has exact residual norm^2 " + to_string(res.residual_norm_sq);
        return res;
    }
    res.success = res.residual_norm_sq == 0;
    res.message = res.success ? "exact decomposition with " + std::to_string(dec.rank()) + " terms"
                              : "rounded decomposition (residual norm^2 " + to_string(res.residual_norm_sq) + ")";
    res.decomposition = std::move(dec);
    return res;
}

// ---- batch search ----------------------------------------------------------

RestartReport run_restart(const SearchOptions& opts, std::uint64_t seed, std::stop_token stop) {
    RestartReport rep;
    rep.seed = seed;
    Phase1Result p1 = phase1_optimize(opts.n, opts.R, opts.P, opts.Q, seed, opts.phase1, stop);
    rep.phase1_objective = rep.final_objective = p1.objective;
    rep.phase1_converged = p1.objective <= opts.converge;
    if (!rep.phase1_converged) return rep;
    SessionState state = SessionState::from_cyclic(p1.factors, seed);
    ScheduleOutcome out = run_schedule(state, opts.schedule, {}, stop);
    rep.final_objective = out.state.objective;
    for (const auto& ev : out.log)
        if (ev.round && ev.round->success && ev.round->decomposition) {
            rep.exact = true;
            rep.decomposition = ev.round->decomposition;
            break;
        }
    return rep;
}

SearchReport search(const SearchOptions& opts, std::stop_token stop) {
    if (opts.P < 0 || opts.Q < 0 || opts.P + 3 * opts.Q != opts.R)
        throw InvalidArgument("search: P + 3Q must equal R");
    if (opts.restarts < 0) throw InvalidArgument("search: restarts must be >= 0");
    SearchReport report;
    const int jobs = std::max(1, opts.jobs);
    for (int start = 0; start < opts.restarts; start += jobs) {
        if (stop.stop_requested()) break;
        const int count = std::min(jobs, opts.restarts - start);
        std::vector<RestartReport> batch(count);
        {
            std::vector<std::jthread> workers;
            for (int k = 0; k < count; ++k)
                workers.emplace_back([&, k] { batch[k] = run_restart(opts, opts.seed + start + k, stop); });
        }
        bool found = false;
        for (auto& r : batch) {
            found = found || r.exact;
            report.restarts.push_back(std::move(r));
        }
        if (found && opts.stop_at_first) break;
    }
    for (size_t i = 0; i < report.restarts.size(); ++i) {
        const auto& r = report.restarts[i];
        if (!report.best) {
            report.best = i;
            continue;
        }
        const auto& b = report.restarts[*report.best];
        bool better = (r.exact && !b.exact) ||
                      (r.exact == b.exact && !r.exact && r.final_objective < b.final_objective);
        if (better) report.best = i;
    }
    return report;
}

// ---- factor files ------------------------------------------------------------

namespace {

constexpr const char* factors_tag = "mmsym-factors";

std::string hex_bits(double v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%016" PRIx64, std::bit_cast<std::uint64_t>(v));
    return buf;
}

double from_hex(const std::string& s, const std::string& where) {
    if (s.size() != 18 || s.rfind("0x", 0) != 0) throw ParseError(where, "expected 0x followed by 16 hex digits");
    char* end = nullptr;
    std::uint64_t bits = std::strtoull(s.c_str() + 2, &end, 16);
    if (*end != '\0') throw ParseError(where, "invalid hex digits");
    double d = std::bit_cast<double>(bits);
    if (!std::isfinite(d)) throw ParseError(where, "non-finite value");
    return d;
}

}  // namespace

std::string serialize_factors(const CyclicFactors& f) {
    check_layout(f);
    std::ostringstream os;
    os << "{\n  \"format\": \"" << factors_tag << "\",\n  \"version\": 1,\n  \"n\": " << f.n << ",\n  \"P\": " << f.P
       << ",\n  \"Q\": " << f.Q << ",\n  \"encoding\": \"hexbits\"";
    const char* names[4] = {"A", "B", "C", "D"};
    for (int b = 0; b < 4; ++b) {
        const Matrix& mb = block_ref(f, b);
        os << ",\n  \"" << names[b] << "\": [";
        for (Eigen::Index i = 0; i < mb.rows(); ++i) {
            os << (i ? ",\n    [" : "\n    [");
            for (Eigen::Index j = 0; j < mb.cols(); ++j) os << (j ? ", \"" : "\"") << hex_bits(mb(i, j)) << "\"";
            os << "]";
        }
        os << (mb.rows() ? "\n  ]" : "]");
    }
    os << "\n}\n";
    return os.str();
}

CyclicFactors parse_factors(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("factors", e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != factors_tag) throw ParseError("format", "not a factor file");
    if (doc.value("version", 0) != 1) throw ParseError("version", "unsupported version");
    for (const char* k : {"n", "P", "Q"})
        if (!doc.contains(k) || !doc[k].is_number_integer()) throw ParseError(k, "missing integer");
    const bool hex = doc.value("encoding", "") == "hexbits";
    CyclicFactors f = CyclicFactors::zeros(doc["n"].get<int>(), doc["P"].get<int>(), doc["Q"].get<int>());
    const char* names[4] = {"A", "B", "C", "D"};
    for (int b = 0; b < 4; ++b) {
        Matrix& mb = block_ref(f, b);
        const auto& rows = doc.contains(names[b]) ? doc[names[b]] : nlohmann::json::array();
        if (!rows.is_array()) throw ParseError(names[b], "expected an array of rows");
        if (mb.cols() && static_cast<Eigen::Index>(rows.size()) != mb.rows())
            throw ParseError(names[b], "wrong number of rows");
        for (size_t i = 0; i < rows.size() && mb.cols(); ++i) {
            if (!rows[i].is_array() || static_cast<Eigen::Index>(rows[i].size()) != mb.cols())
                throw ParseError(std::string(names[b]) + "[" + std::to_string(i) + "]", "wrong number of entries");
            for (size_t j = 0; j < rows[i].size(); ++j) {
                std::string where = std::string(names[b]) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
                const auto& v = rows[i][j];
                if (hex) {
                    if (!v.is_string()) throw ParseError(where, "expected hex string");
                    mb(i, j) = from_hex(v.get<std::string>(), where);
                } else {
                    if (!v.is_number()) throw ParseError(where, "expected number");
                    mb(i, j) = v.get<double>();
                    if (!std::isfinite(mb(i, j))) throw ParseError(where, "non-finite value");
                }
            }
        }
    }
    return f;
}

void save_factors(const CyclicFactors& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << serialize_factors(f);
    if (!out) throw Error("write failed: " + path);
}

CyclicFactors load_factors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_factors(ss.str());
}

}  // namespace mmsym
