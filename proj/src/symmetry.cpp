#include "mmsym/symmetry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace mmsym {

namespace {

ExactMat must_invert(const ExactMat& m, const char* which) {
    auto inv = inverse(m);
    if (!inv) throw SingularError(std::string("group element: ") + which + " is singular");
    return *inv;
}

// Scale so the first nonzero entry is 1.
ExactMat normalized(const ExactMat& m) {
    for (const auto& v : m.entries())
        if (v != 0) {
            Rational inv = 1 / v;
            ExactMat r = m;
            return r *= inv;
        }
    return m;
}

int mod3(int c) { return ((c % 3) + 3) % 3; }

std::string element_key(const GroupElement& e) {
    std::string key = std::to_string(mod3(e.cyclic)) + (e.transpose ? "T" : "N");
    for (const ExactMat* m : {&e.g, &e.h, &e.k}) {
        const ExactMat nm = normalized(*m);
        for (const auto& v : nm.entries()) {
            key += ',';
            key += to_string(v);
        }
        key += ';';
    }
    return key;
}

// Inverses precomputed for repeated application.
struct PreparedElement {
    GroupElement e;
    ExactMat gi, hi, ki;

    explicit PreparedElement(const GroupElement& el)
        : e(el), gi(must_invert(el.g, "g")), hi(must_invert(el.h, "h")), ki(must_invert(el.k, "k")) {}

    ExactTriple apply(const ExactTriple& t) const {
        if (t.x.n() != e.n() || t.y.n() != e.n() || t.z.n() != e.n())
            throw DimensionError("apply_element: size mismatch");
        ExactMat x = t.x, y = t.y, z = t.z;
        if (e.transpose) {
            ExactMat xt = x.transpose(), yt = y.transpose(), zt = z.transpose();
            x = std::move(xt);
            y = std::move(zt);
            z = std::move(yt);
        }
        for (int c = 0; c < mod3(e.cyclic); ++c) {
            ExactMat nx = z, ny = x, nz = y;
            x = std::move(nx);
            y = std::move(ny);
            z = std::move(nz);
        }
        return {e.g * x * hi, e.h * y * ki, e.k * z * gi};
    }
};

}  // namespace

GroupElement identity_element(int n) {
    auto i = ExactMat::identity(n);
    return {i, i, i, 0, false, "id"};
}

GroupElement cyclic_element(int n, int p) {
    GroupElement e = identity_element(n);
    e.cyclic = mod3(p);
    e.name = "pi";
    return e;
}

GroupElement transpose_element(int n) {
    GroupElement e = identity_element(n);
    e.transpose = true;
    e.name = "tr";
    return e;
}

GroupElement linear_element(ExactMat g, ExactMat h, ExactMat k, std::string name) {
    if (g.n() != h.n() || g.n() != k.n()) throw DimensionError("linear_element: size mismatch");
    GroupElement e{std::move(g), std::move(h), std::move(k), 0, false, std::move(name)};
    check_invertible(e);
    return e;
}

GroupElement conjugation_element(const ExactMat& a, std::string name) {
    return linear_element(a, a, a, std::move(name));
}

void check_invertible(const GroupElement& e) {
    if (e.g.n() != e.h.n() || e.g.n() != e.k.n()) throw DimensionError("group element: size mismatch");
    if (determinant(e.g) == 0) throw SingularError("group element: g is singular");
    if (determinant(e.h) == 0) throw SingularError("group element: h is singular");
    if (determinant(e.k) == 0) throw SingularError("group element: k is singular");
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
    if (a.n() != b.n()) throw DimensionError("compose: size mismatch");
    // a∘b = L_a P^ca T^ta L_b P^cb T^tb; move T^ta and P^ca to the right of L_b.
    ExactMat g = b.g, h = b.h, k = b.k;
    int cb = mod3(b.cyclic);
    if (a.transpose) {
        // T∘L(g,h,k) = L(h^-T, g^-T, k^-T)∘T and T∘P^c = P^-c∘T
        ExactMat ng = must_invert(h, "h").transpose();
        ExactMat nh = must_invert(g, "g").transpose();
        ExactMat nk = must_invert(k, "k").transpose();
        g = std::move(ng);
        h = std::move(nh);
        k = std::move(nk);
        cb = mod3(-cb);
    }
    for (int c = 0; c < mod3(a.cyclic); ++c) {
        // P∘L(g,h,k) = L(k,g,h)∘P
        ExactMat ng = k, nh = g, nk = h;
        g = std::move(ng);
        h = std::move(nh);
        k = std::move(nk);
    }
    GroupElement r;
    r.g = a.g * g;
    r.h = a.h * h;
    r.k = a.k * k;
    r.cyclic = mod3(a.cyclic + cb);
    r.transpose = a.transpose != b.transpose;
    return r;
}

GroupElement inverse(const GroupElement& e) {
    const int n = e.n();
    GroupElement lin_inv{must_invert(e.g, "g"), must_invert(e.h, "h"), must_invert(e.k, "k"), 0, false, {}};
    GroupElement rest = identity_element(n);
    rest.cyclic = mod3(-e.cyclic);
    GroupElement t = identity_element(n);
    t.transpose = e.transpose;
    // (L P^c T^t)^-1 = T^t P^-c L^-1
    return compose(compose(t, rest), lin_inv);
}

GroupElement power(const GroupElement& e, int k) {
    GroupElement base = k < 0 ? inverse(e) : e;
    GroupElement r = identity_element(e.n());
    for (int i = 0; i < std::abs(k); ++i) r = compose(base, r);
    return r;
}

bool same_element(const GroupElement& a, const GroupElement& b) {
    if (a.n() != b.n()) return false;
    return element_key(a) == element_key(b);
}

std::vector<GroupElement> group_closure(const std::vector<GroupElement>& gens, size_t limit) {
    if (gens.empty()) return {};
    const int n = gens[0].n();
    std::vector<GroupElement> elems{identity_element(n)};
    std::unordered_map<std::string, size_t> seen{{element_key(elems[0]), 0}};
    for (size_t i = 0; i < elems.size(); ++i) {
        for (const auto& g : gens) {
            GroupElement p = compose(g, elems[i]);
            auto key = element_key(p);
            if (seen.count(key)) continue;
            if (elems.size() >= limit) throw InvalidArgument("group_closure: more than " + std::to_string(limit) + " elements");
            seen.emplace(key, elems.size());
            elems.push_back(std::move(p));
        }
    }
    return elems;
}

ExactTriple apply_element(const GroupElement& e, const ExactTriple& t) { return PreparedElement(e).apply(t); }

ExactDecomposition apply_element(const GroupElement& e, const ExactDecomposition& s) {
    PreparedElement p(e);
    ExactDecomposition out;
    out.n = s.n;
    out.name = s.name;
    out.note = s.note;
    out.generators = s.generators;
    out.terms.reserve(s.terms.size());
    for (const auto& t : s.terms) out.terms.push_back(p.apply(t));
    return out;
}

ExactDecomposition standard_decomposition(int n) {
    ExactDecomposition d;
    d.n = n;
    d.name = "standard" + std::to_string(n);
    auto unit = [n](int i, int j) {
        ExactMat m(n);
        m(i, j) = 1;
        return m;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) d.terms.push_back({unit(i, j), unit(j, k), unit(k, i)});
    return d;
}

bool is_tensor_symmetry(const GroupElement& e, int n) {
    if (e.n() != n) throw DimensionError("is_tensor_symmetry: size mismatch");
    return residual(apply_element(e, standard_decomposition(n))).norm_sq == 0;
}

CanonicalTriple canonical(const ExactTriple& t) {
    auto first_nonzero = [](const ExactMat& m) -> Rational {
        for (const auto& v : m.entries())
            if (v != 0) return v;
        throw InvalidArgument("canonical: zero matrix in term");
    };
    Rational a = first_nonzero(t.x), b = first_nonzero(t.y);
    CanonicalTriple c{t.x, t.y, t.z};
    c.x *= Rational(1 / a);
    c.y *= Rational(1 / b);
    c.z *= Rational(a * b);
    return c;
}

namespace {

std::vector<CanonicalTriple> sorted_canonical(const ExactDecomposition& s) {
    std::vector<CanonicalTriple> v;
    v.reserve(s.terms.size());
    for (const auto& t : s.terms) v.push_back(canonical(t));
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

bool decompositions_equal(const ExactDecomposition& a, const ExactDecomposition& b) {
    if (a.n != b.n || a.terms.size() != b.terms.size()) return false;
    return sorted_canonical(a) == sorted_canonical(b);
}

bool is_decomposition_symmetry(const GroupElement& e, const ExactDecomposition& s) {
    return decompositions_equal(apply_element(e, s), s);
}

std::vector<std::vector<int>> orbit_partition(const ExactDecomposition& s, const std::vector<GroupElement>& gens) {
    const int r = s.rank();
    std::map<CanonicalTriple, int> index;
    for (int i = 0; i < r; ++i) index.emplace(canonical(s.terms[i]), i);

    std::vector<int> parent(r);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (size_t gi = 0; gi < gens.size(); ++gi) {
        PreparedElement p(gens[gi]);
        for (int i = 0; i < r; ++i) {
            auto it = index.find(canonical(p.apply(s.terms[i])));
            if (it == index.end()) {
                std::string gname = gens[gi].name.empty() ? "#" + std::to_string(gi) : gens[gi].name;
                throw InvalidArgument("generator " + gname + " does not preserve the decomposition: image of term " +
                                      std::to_string(i) + " is not a term");
            }
            parent[find(i)] = find(it->second);
        }
    }
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < r; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

std::vector<int> orbit_sizes(const std::vector<std::vector<int>>& partition) {
    std::vector<int> sizes;
    for (const auto& o : partition) sizes.push_back(static_cast<int>(o.size()));
    std::sort(sizes.begin(), sizes.end());
    return sizes;
}

std::map<std::array<int, 3>, std::vector<int>> rank_triple_partition(const ExactDecomposition& s) {
    std::map<std::array<int, 3>, std::vector<int>> out;
    for (int i = 0; i < s.rank(); ++i) {
        const auto& t = s.terms[i];
        std::array<int, 3> key{rank(t.x), rank(t.y), rank(t.z)};
        std::sort(key.begin(), key.end());
        out[key].push_back(i);
    }
    return out;
}

Poly charpoly(const ExactMat& a) {
    // Faddeev-LeVerrier: exact over Q.
    const int n = a.n();
    Poly p(n + 1);
    p[0] = 1;
    ExactMat mk(n);
    for (int k = 1; k <= n; ++k) {
        mk = a * mk;
        for (int i = 0; i < n; ++i) mk(i, i) += p[k - 1];
        p[k] = -trace(ExactMat(a * mk)) / k;
    }
    return p;
}

std::string poly_to_string(const Poly& p) {
    const int deg = static_cast<int>(p.size()) - 1;
    std::string s;
    for (int i = 0; i <= deg; ++i) {
        const Rational& c = p[i];
        if (c == 0) continue;
        int e = deg - i;
        Rational mag = abs(c);
        if (s.empty())
            s += c < 0 ? "-" : "";
        else
            s += c < 0 ? " - " : " + ";
        if (mag != 1 || e == 0) s += to_string(mag);
        if (e > 0) s += e == 1 ? "t" : "t^" + std::to_string(e);
    }
    return s.empty() ? "0" : s;
}

Fingerprint fingerprint(const ExactDecomposition& s) {
    Fingerprint f;
    for (const auto& t : s.terms) {
        if (t.is_cube()) {
            ++f.symmetric[charpoly(t.x)];
            continue;
        }
        std::array<Poly, 3> key{charpoly(t.x), charpoly(t.y), charpoly(t.z)};
        std::sort(key.begin(), key.end());
        ++f.triples[key];
    }
    return f;
}

ProjPoint projective_canonical(const std::vector<Rational>& v) {
    Integer lcm = 1;
    for (const auto& q : v) mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), q.get_den_mpz_t());
    std::vector<Integer> ints;
    Integer g = 0;
    for (const auto& q : v) {
        Integer z = q.get_num() * (lcm / q.get_den());
        mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), z.get_mpz_t());
        ints.push_back(z);
    }
    if (g == 0) throw InvalidArgument("projective point: zero vector");
    int sign = 0;
    for (const auto& z : ints)
        if (z != 0) {
            sign = sgn(z);
            break;
        }
    ProjPoint p;
    for (auto& z : ints) {
        z = z * sign / g;
        if (!z.fits_slong_p()) throw InvalidArgument("projective point: coordinate too large");
        p.push_back(z.get_si());
    }
    return p;
}

std::string point_to_string(const ProjPoint& p) {
    std::string s = "(";
    for (size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + std::to_string(p[i]);
    return s + ")";
}

std::pair<ProjPoint, ProjPoint> rank_one_factors(const ExactMat& m) {
    if (rank(m) != 1) throw InvalidArgument("rank_one_factors: matrix does not have rank one");
    const int n = m.n();
    std::vector<Rational> col(n), row(n);
    int jc = -1, ir = -1;
    for (int j = 0; j < n && jc < 0; ++j)
        for (int i = 0; i < n; ++i)
            if (m(i, j) != 0) {
                jc = j;
                break;
            }
    for (int i = 0; i < n && ir < 0; ++i)
        for (int j = 0; j < n; ++j)
            if (m(i, j) != 0) {
                ir = i;
                break;
            }
    for (int i = 0; i < n; ++i) col[i] = m(i, jc);
    for (int j = 0; j < n; ++j) row[j] = m(ir, j);
    return {projective_canonical(col), projective_canonical(row)};
}

namespace {

std::vector<WeightedPoint> ordered_points(const std::map<ProjPoint, int>& counts) {
    std::vector<WeightedPoint> v;
    for (const auto& [p, c] : counts) v.push_back({p, c});
    std::stable_sort(v.begin(), v.end(), [](const WeightedPoint& a, const WeightedPoint& b) {
        return a.occurrences > b.occurrences;
    });
    return v;
}

}  // namespace

Configuration extract_configuration(const ExactDecomposition& s) {
    std::map<ProjPoint, int> cols, rows;
    for (const auto& t : s.terms)
        for (const ExactMat* m : {&t.x, &t.y, &t.z}) {
            if (rank(*m) != 1) continue;
            auto [c, r] = rank_one_factors(*m);
            ++cols[c];
            ++rows[r];
        }
    return {ordered_points(rows), ordered_points(cols)};
}

std::vector<std::vector<Rational>> default_framing(int n) {
    std::vector<std::vector<Rational>> pts;
    for (int i = 0; i < n; ++i) {
        std::vector<Rational> e(n, 0);
        e[i] = 1;
        pts.push_back(e);
    }
    pts.push_back(std::vector<Rational>(n, -1));
    return pts;
}

GroupElement normalize_framing(const std::vector<std::vector<Rational>>& points) {
    if (points.empty()) throw InvalidArgument("normalize_framing: no points");
    const int n = static_cast<int>(points.size()) - 1;
    if (n < 1) throw InvalidArgument("normalize_framing: need n+1 points");
    for (const auto& p : points)
        if (static_cast<int>(p.size()) != n) throw DimensionError("normalize_framing: need n+1 points in dimension n");
    // Every n-subset must be independent.
    for (int skip = 0; skip <= n; ++skip) {
        std::vector<std::vector<Rational>> rows;
        for (int i = 0; i <= n; ++i)
            if (i != skip) rows.push_back(points[i]);
        if (rank_of_rows(rows) != n) throw InvalidArgument("normalize_framing: points are not in general position");
    }
    // B = [p_1 .. p_n], lambda = B^-1 (-p_{n+1}); B diag(lambda) sends the framing to the points.
    ExactMat b(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = points[j][i];
    ExactMat binv = must_invert(b, "framing");
    std::vector<Rational> lambda(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) lambda[i] -= binv(i, j) * points[n][j];
    ExactMat f(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) f(i, j) = b(i, j) * lambda[j];
    ExactMat g = must_invert(f, "framing");
    return conjugation_element(normalized(g), "framing");
}

std::vector<ProjPoint> apply_to_points(const GroupElement& e, const std::vector<std::vector<Rational>>& points) {
    std::vector<ProjPoint> out;
    for (const auto& p : points) {
        if (static_cast<int>(p.size()) != e.n()) throw DimensionError("apply_to_points: size mismatch");
        std::vector<Rational> q(p.size(), 0);
        for (int i = 0; i < e.n(); ++i)
            for (int j = 0; j < e.n(); ++j) q[i] += e.g(i, j) * p[j];
        out.push_back(projective_canonical(q));
    }
    return out;
}

}  // namespace mmsym
