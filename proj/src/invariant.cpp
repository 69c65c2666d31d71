#include "mmsym/invariant.hpp"

#include <algorithm>
#include <set>

namespace mmsym {

namespace {

long long binom(long long n, long long k) {
    if (k < 0 || n < k) return 0;
    long long r = 1;
    for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void check_n(int n, int lo) {
    if (n < lo) throw InvalidArgument("n must be at least " + std::to_string(lo));
}

std::string a(int w) { return "A" + std::to_string(w); }

}  // namespace

long long z3_invariant_dim(long long m) {
    if (m < 1) throw InvalidArgument("m must be positive");
    return (m * m * m + 2 * m) / 3;
}

long long znp1_invariant_dim(int n) {
    check_n(n, 2);
    long long x = n;
    return x * x * x * x * x - x * x * x * x + x * x * x - x * x + x;
}

long long znp1_invariant_dim_table(int n) {
    check_n(n, 2);
    long long x = n;
    return x * x * x + 3 * x * x * (x - 1) * (x - 1) + x * (x - 1) * (x - 1) * (x - 1) * (x - 1);
}

std::vector<WeightSummand> znp1_z3_summands(int n) {
    check_n(n, 2);
    const int q = n + 1;
    auto dim = [n](int w) { return w == 0 ? n : n - 1; };
    std::vector<WeightSummand> out;
    for (int x = 0; x <= n; ++x)
        for (int y = x; y <= n; ++y)
            for (int z = y; z <= n; ++z) {
                if ((x + y + z) % q != 0) continue;
                WeightSummand s;
                s.weights = {x, y, z};
                if (x == y && y == z) {
                    s.sym_dim = binom(dim(x) + 2, 3);
                    s.alt_dim = binom(dim(x), 3);
                    s.sym_label = "S^3 " + a(x);
                    s.alt_label = "Lambda^3 " + a(x);
                } else if (x == y || y == z) {
                    int rep = y, single = x == y ? z : x;
                    s.sym_dim = dim(single) * binom(dim(rep) + 1, 2);
                    s.alt_dim = dim(single) * binom(dim(rep), 2);
                    s.sym_label = a(single) + " S^2 " + a(rep);
                    s.alt_label = a(single) + " Lambda^2 " + a(rep);
                } else {
                    s.sym_dim = s.alt_dim = static_cast<long long>(dim(x)) * dim(y) * dim(z);
                    std::string base = "(" + a(x) + " " + a(y) + " " + a(z) + ")";
                    s.sym_label = base + "^S";
                    s.alt_label = base + "^Lambda";
                }
                out.push_back(std::move(s));
            }
    return out;
}

SymAltDims znp1_z3_invariant_dim(int n) {
    SymAltDims d;
    for (const auto& s : znp1_z3_summands(n)) {
        d.sym += s.sym_dim;
        d.alt += s.alt_dim;
    }
    d.total = d.sym + d.alt;
    return d;
}

std::vector<std::vector<int>> isotypic_index(int n) {
    check_n(n, 1);
    std::vector<std::vector<int>> idx(n + 1);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) idx[((i - j) % (n + 1) + n + 1) % (n + 1)].push_back((i - 1) * n + (j - 1));
    return idx;
}

ExactMat znp1_generator(int n) {
    check_n(n, 1);
    ExactMat c(n);
    for (int i = 1; i < n; ++i) c(i, i - 1) = 1;
    for (int i = 0; i < n; ++i) c(i, n - 1) = -1;
    return c;
}

std::vector<GroupElement> znp1_group(int n) {
    ExactMat c = znp1_generator(n);
    std::vector<GroupElement> g;
    ExactMat p = ExactMat::identity(n);
    for (int k = 0; k <= n; ++k) {
        g.push_back(conjugation_element(p, "c^" + std::to_string(k)));
        p = c * p;
    }
    return g;
}

std::vector<GroupElement> znp1_z3_group(int n) {
    std::vector<GroupElement> out;
    for (int j = 0; j < 3; ++j)
        for (const auto& e : znp1_group(n)) {
            GroupElement x = compose(cyclic_element(n, j), e);
            x.name = "pi^" + std::to_string(j) + " " + e.name;
            out.push_back(std::move(x));
        }
    return out;
}

void check_closed(const std::vector<GroupElement>& elements) {
    for (const auto& x : elements)
        for (const auto& y : elements) {
            GroupElement p = compose(x, y);
            bool found = std::any_of(elements.begin(), elements.end(), [&](const GroupElement& e) { return same_element(e, p); });
            if (!found) throw InvalidArgument("element list is not closed under composition");
        }
}

namespace {

// Action of one group element on basis tensors e_a (x) e_b (x) e_c of A^{x3}.
template <class S>
struct TensorAction {
    int n = 0, m = 0;
    int cyclic = 0;
    bool transpose = false;
    std::vector<std::vector<std::pair<int, S>>> lx, ly, lz;  // sparse columns

    static std::vector<std::vector<std::pair<int, S>>> slot_map(const ExactMat& left, const ExactMat& right_inv) {
        // column (i,j) holds left * E_ij * right_inv
        const int n = left.n();
        std::vector<std::vector<std::pair<int, S>>> cols(n * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int p = 0; p < n; ++p) {
                    if (left(p, i) == 0) continue;
                    for (int q = 0; q < n; ++q) {
                        Rational v = left(p, i) * right_inv(j, q);
                        if (v == 0) continue;
                        if constexpr (std::is_same_v<S, Rational>)
                            cols[i * n + j].emplace_back(p * n + q, v);
                        else
                            cols[i * n + j].emplace_back(p * n + q, v.get_d());
                    }
                }
        return cols;
    }

    explicit TensorAction(const GroupElement& e) : n(e.n()), m(e.n() * e.n()), cyclic(e.cyclic % 3), transpose(e.transpose) {
        ExactMat gi = *inverse(e.g), hi = *inverse(e.h), ki = *inverse(e.k);
        lx = slot_map(e.g, hi);
        ly = slot_map(e.h, ki);
        lz = slot_map(e.k, gi);
    }

    int tr(int a) const { return (a % n) * n + a / n; }

    // Adds coef * e.(e_a (x) e_b (x) e_c) into out (dense, size m^3).
    void add_translate(int a, int b, int c, const S& coef, std::vector<S>& out) const {
        int x = a, y = b, z = c;
        if (transpose) {
            int nx = tr(x), ny = tr(z), nz = tr(y);
            x = nx, y = ny, z = nz;
        }
        for (int k = 0; k < cyclic; ++k) {
            int nx = z, ny = x, nz = y;
            x = nx, y = ny, z = nz;
        }
        for (const auto& [p, vp] : lx[x]) {
            S cp = coef * vp;
            for (const auto& [q, vq] : ly[y]) {
                S cpq = cp * vq;
                size_t base = (static_cast<size_t>(p) * m + q) * m;
                for (const auto& [r, vr] : lz[z]) out[base + r] += cpq * vr;
            }
        }
    }
};

template <class S>
Tensor3<S> group_average_impl(const Tensor3<S>& t, const std::vector<GroupElement>& elements) {
    if (elements.empty()) throw InvalidArgument("group_average: empty element list");
    const int n = elements[0].n();
    if (t.m() != n * n) throw DimensionError("group_average: tensor size is not n^2");
    check_closed(elements);
    const int m = t.m();
    Tensor3<S> out(m);
    for (const auto& e : elements) {
        TensorAction<S> act(e);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c)
                    if (t.at(a, b, c) != 0) act.add_translate(a, b, c, t.at(a, b, c), out.data());
    }
    S denom(static_cast<long>(elements.size()));
    for (auto& v : out.data()) v /= denom;
    return out;
}

// Incremental row echelon basis over Q with sparse bookkeeping.
class EchelonBasis {
public:
    explicit EchelonBasis(size_t dim) : pivot_row_(dim, -1) {}

    // Returns true if v was independent of the current basis.
    bool insert(std::vector<Rational> v) {
        for (size_t p = 0; p < v.size(); ++p) {
            if (v[p] == 0) continue;
            int row = pivot_row_[p];
            if (row < 0) {
                Rational inv = 1 / v[p];
                std::vector<int> nz;
                for (size_t j = p; j < v.size(); ++j)
                    if (v[j] != 0) {
                        v[j] *= inv;
                        nz.push_back(static_cast<int>(j));
                    }
                pivot_row_[p] = static_cast<int>(rows_.size());
                rows_.push_back(std::move(v));
                nonzeros_.push_back(std::move(nz));
                return true;
            }
            Rational f = v[p];
            const auto& b = rows_[row];
            for (int j : nonzeros_[row]) v[j] -= f * b[j];
        }
        return false;
    }
    size_t rank() const { return rows_.size(); }

private:
    std::vector<std::vector<Rational>> rows_;
    std::vector<std::vector<int>> nonzeros_;
    std::vector<int> pivot_row_;
};

bool rotation_minimal(int a, int b, int c) {
    std::array<int, 3> x{a, b, c}, y{c, a, b}, z{b, c, a};
    return x <= y && x <= z;
}

}  // namespace

Tensor3<Rational> group_average(const Tensor3<Rational>& t, const std::vector<GroupElement>& elements) {
    return group_average_impl(t, elements);
}

Tensor3<double> group_average(const Tensor3<double>& t, const std::vector<GroupElement>& elements) {
    return group_average_impl(t, elements);
}

long long cyclic_projector_rank(int m, std::stop_token stop) {
    if (m < 1) throw InvalidArgument("m must be positive");
    const size_t dim = static_cast<size_t>(m) * m * m;
    EchelonBasis basis(dim);
    for (int a = 0; a < m; ++a) {
        if (stop.stop_requested()) throw Cancelled();
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c) {
                std::vector<Rational> v(dim);
                v[(static_cast<size_t>(a) * m + b) * m + c] += 1;
                v[(static_cast<size_t>(c) * m + a) * m + b] += 1;
                v[(static_cast<size_t>(b) * m + c) * m + a] += 1;
                basis.insert(std::move(v));
            }
    }
    return static_cast<long long>(basis.rank());
}

long long group_projector_rank(const std::vector<GroupElement>& elements, std::stop_token stop) {
    if (elements.empty()) throw InvalidArgument("group_projector_rank: empty element list");
    check_closed(elements);
    const int n = elements[0].n();
    const int m = n * n;
    const size_t dim = static_cast<size_t>(m) * m * m;
    std::vector<TensorAction<Rational>> acts;
    for (const auto& e : elements) acts.emplace_back(e);
    // The projector is constant on cyclic rotations of a basis index when the
    // group contains the cyclic shift.
    const GroupElement pi = cyclic_element(n, 1);
    const bool has_shift =
        std::any_of(elements.begin(), elements.end(), [&](const GroupElement& e) { return same_element(e, pi); });
    EchelonBasis basis(dim);
    const Rational one(1);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            if (stop.stop_requested()) throw Cancelled();
            for (int c = 0; c < m; ++c) {
                if (has_shift && !rotation_minimal(a, b, c)) continue;
                std::vector<Rational> v(dim);
                for (const auto& act : acts) act.add_translate(a, b, c, one, v);
                basis.insert(std::move(v));
            }
        }
    return static_cast<long long>(basis.rank());
}

namespace {

// Gaussian rationals Q(i).
struct GaussQ {
    Rational re, im;

    GaussQ() = default;
    GaussQ(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {}

    GaussQ& operator+=(const GaussQ& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    GaussQ& operator-=(const GaussQ& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    friend GaussQ operator*(const GaussQ& x, const GaussQ& y) {
        return {x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re};
    }
    Rational norm_sq() const { return re * re + im * im; }
    bool is_zero() const { return re == 0 && im == 0; }
};

using CMat = std::vector<GaussQ>;  // 9 x 9 row-major operator on A

GaussQ i_power(int k) {
    switch (((k % 4) + 4) % 4) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

}  // namespace

std::map<std::string, Rational> m3_component_norms(std::stop_token stop) {
    const int n = 3, m = 9;
    // Orthogonal matrix with characteristic polynomial t^3 + t^2 + t + 1 (eigenvalues i, -1, -i),
    // rationally conjugate to a0; conjugation by it is Frobenius-orthogonal on A.
    ExactMat r(n, {0, -1, 0, 1, 0, 0, 0, 0, -1});
    ExactMat rinv = r.transpose();
    // Conjugation operator C on A, as a 9 x 9 matrix: C[(p,q),(i,j)] = r[p,i] rinv[j,q].
    std::vector<Rational> conj(m * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int p = 0; p < n; ++p)
                for (int q = 0; q < n; ++q) conj[(p * n + q) * m + (i * n + j)] = r(p, i) * rinv(j, q);
    std::vector<std::vector<Rational>> powers{std::vector<Rational>(m * m)};
    for (int i = 0; i < m; ++i) powers[0][i * m + i] = 1;
    for (int k = 1; k < 4; ++k) {
        std::vector<Rational> next(m * m);
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < m; ++l)
                for (int j = 0; j < m; ++j) next[i * m + j] += conj[i * m + l] * powers[k - 1][l * m + j];
        powers.push_back(std::move(next));
    }
    // Weight-u projector P_u = 1/4 sum_k i^{-uk} C^k.
    std::vector<CMat> proj(4, CMat(m * m));
    for (int u = 0; u < 4; ++u)
        for (int k = 0; k < 4; ++k) {
            GaussQ w = i_power(-u * k) * GaussQ(Rational(1, 4));
            for (int e = 0; e < m * m; ++e)
                if (powers[k][e] != 0) proj[u][e] += w * GaussQ(powers[k][e]);
        }

    Tensor3<Rational> mt = matmul_tensor<Rational>(n);
    std::vector<std::array<int, 3>> support;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                if (mt.at(a, b, c) != 0) support.push_back({a, b, c});

    const size_t dim = static_cast<size_t>(m) * m * m;
    auto project_weights = [&](int wa, int wb, int wc, std::vector<GaussQ>& out) {
        for (const auto& s : support) {
            const Rational& v = mt.at(s[0], s[1], s[2]);
            for (int a = 0; a < m; ++a) {
                const GaussQ& pa = proj[wa][a * m + s[0]];
                if (pa.is_zero()) continue;
                GaussQ ca = pa * GaussQ(v);
                for (int b = 0; b < m; ++b) {
                    const GaussQ& pb = proj[wb][b * m + s[1]];
                    if (pb.is_zero()) continue;
                    GaussQ cab = ca * pb;
                    for (int c = 0; c < m; ++c) {
                        const GaussQ& pc = proj[wc][c * m + s[2]];
                        if (pc.is_zero()) continue;
                        out[(static_cast<size_t>(a) * m + b) * m + c] += cab * pc;
                    }
                }
            }
        }
    };

    std::map<std::string, Rational> norms;
    for (const auto& summand : znp1_z3_summands(n)) {
        if (stop.stop_requested()) throw Cancelled();
        std::array<int, 3> w = summand.weights;
        std::set<std::array<int, 3>> orders;
        do orders.insert(w);
        while (std::next_permutation(w.begin(), w.end()));
        std::vector<GaussQ> v(dim);
        for (const auto& o : orders) project_weights(o[0], o[1], o[2], v);
        // Symmetric and alternating parts over the six slot permutations.
        Rational sym_norm = 0, alt_norm = 0;
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c) {
                    auto at = [&](int x, int y, int z) -> const GaussQ& {
                        return v[(static_cast<size_t>(x) * m + y) * m + z];
                    };
                    GaussQ even = at(a, b, c);
                    even += at(b, c, a);
                    even += at(c, a, b);
                    GaussQ odd = at(b, a, c);
                    odd += at(a, c, b);
                    odd += at(c, b, a);
                    GaussQ s = even, t = even;
                    s += odd;
                    t -= odd;
                    sym_norm += s.norm_sq();
                    alt_norm += t.norm_sq();
                }
        norms[summand.sym_label] = sym_norm / 36;
        norms[summand.alt_label] = alt_norm / 36;
    }
    return norms;
}

}  // namespace mmsym
