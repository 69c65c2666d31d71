#pragma once

#include "mmsym/errors.hpp"
#include "mmsym/rational.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mmsym {

enum class ScalarMode { exact, floating };

inline const char* mode_name(ScalarMode m) { return m == ScalarMode::exact ? "exact" : "float"; }

template <class S>
struct scalar_traits;

template <>
struct scalar_traits<Rational> {
    static constexpr ScalarMode mode = ScalarMode::exact;
    static bool finite(const Rational&) { return true; }
};

template <>
struct scalar_traits<double> {
    static constexpr ScalarMode mode = ScalarMode::floating;
    static bool finite(double v) { return std::isfinite(v); }
};

// Square n x n matrix, row-major. Entry (i,j) is the paper's x^{i+1}_{j+1}.
template <class S>
class Mat {
public:
    Mat() = default;
    explicit Mat(int n) : n_(n), a_(static_cast<size_t>(n) * n, S(0)) {
        if (n < 1) throw DimensionError("matrix size must be positive");
    }
    Mat(int n, std::vector<S> entries) : n_(n), a_(std::move(entries)) {
        if (n < 1 || a_.size() != static_cast<size_t>(n) * n)
            throw DimensionError("matrix entry count does not match n*n");
    }

    static Mat identity(int n) {
        Mat m(n);
        for (int i = 0; i < n; ++i) m(i, i) = S(1);
        return m;
    }

    int n() const { return n_; }
    S& operator()(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
    const S& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }
    S& operator[](size_t flat) { return a_[flat]; }
    const S& operator[](size_t flat) const { return a_[flat]; }
    const std::vector<S>& entries() const { return a_; }
    size_t size() const { return a_.size(); }

    bool is_zero() const {
        for (const auto& v : a_)
            if (v != 0) return false;
        return true;
    }

    Mat transpose() const {
        Mat t(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Mat& operator*=(const S& s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend Mat operator*(const Mat& a, const Mat& b) {
        check_same(a, b);
        Mat c(a.n_);
        for (int i = 0; i < a.n_; ++i)
            for (int k = 0; k < a.n_; ++k) {
                if (a(i, k) == 0) continue;
                for (int j = 0; j < a.n_; ++j) c(i, j) += a(i, k) * b(k, j);
            }
        return c;
    }
    friend Mat operator+(Mat a, const Mat& b) {
        check_same(a, b);
        for (size_t i = 0; i < a.a_.size(); ++i) a.a_[i] += b.a_[i];
        return a;
    }
    friend Mat operator-(Mat a, const Mat& b) {
        check_same(a, b);
        for (size_t i = 0; i < a.a_.size(); ++i) a.a_[i] -= b.a_[i];
        return a;
    }
    friend Mat operator*(const S& s, Mat a) { return a *= s; }
    Mat operator-() const {
        Mat r = *this;
        for (auto& v : r.a_) v = -v;
        return r;
    }

    friend bool operator==(const Mat& a, const Mat& b) {
        if (a.n_ != b.n_) return false;
        for (size_t i = 0; i < a.a_.size(); ++i)
            if (a.a_[i] != b.a_[i]) return false;
        return true;
    }
    friend bool operator!=(const Mat& a, const Mat& b) { return !(a == b); }
    // Lexicographic on (n, row-major entries); gives a total order for multiset sorting.
    friend bool operator<(const Mat& a, const Mat& b) {
        if (a.n_ != b.n_) return a.n_ < b.n_;
        for (size_t i = 0; i < a.a_.size(); ++i) {
            if (a.a_[i] < b.a_[i]) return true;
            if (b.a_[i] < a.a_[i]) return false;
        }
        return false;
    }

private:
    static void check_same(const Mat& a, const Mat& b) {
        if (a.n_ != b.n_) throw DimensionError("matrix size mismatch");
    }

    int n_ = 0;
    std::vector<S> a_;
};

// Dense m x m x m tensor; entry (a,b,c) at (a*m + b)*m + c.
template <class S>
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int m) : m_(m), a_(static_cast<size_t>(m) * m * m, S(0)) {
        if (m < 1) throw DimensionError("tensor size must be positive");
    }

    int m() const { return m_; }
    S& at(int a, int b, int c) { return a_[(static_cast<size_t>(a) * m_ + b) * m_ + c]; }
    const S& at(int a, int b, int c) const { return a_[(static_cast<size_t>(a) * m_ + b) * m_ + c]; }
    std::vector<S>& data() { return a_; }
    const std::vector<S>& data() const { return a_; }

    S norm_sq() const {
        S s(0);
        for (const auto& v : a_) s += v * v;
        return s;
    }
    size_t count_nonzero() const {
        size_t c = 0;
        for (const auto& v : a_)
            if (v != 0) ++c;
        return c;
    }

    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) {
        check_same(a, b);
        for (size_t i = 0; i < a.a_.size(); ++i) a.a_[i] += b.a_[i];
        return a;
    }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) {
        check_same(a, b);
        for (size_t i = 0; i < a.a_.size(); ++i) a.a_[i] -= b.a_[i];
        return a;
    }
    friend bool operator==(const Tensor3& a, const Tensor3& b) {
        if (a.m_ != b.m_) return false;
        for (size_t i = 0; i < a.a_.size(); ++i)
            if (a.a_[i] != b.a_[i]) return false;
        return true;
    }

private:
    static void check_same(const Tensor3& a, const Tensor3& b) {
        if (a.m_ != b.m_) throw DimensionError("tensor size mismatch");
    }

    int m_ = 0;
    std::vector<S> a_;
};

template <class S>
struct RankOneTriple {
    Mat<S> x, y, z;

    int n() const { return x.n(); }
    bool valid() const { return !x.is_zero() && !y.is_zero() && !z.is_zero(); }
    bool is_cube() const { return x == y && y == z; }
    friend bool operator==(const RankOneTriple& a, const RankOneTriple& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
};

// Element of the symmetry group of M<n>: the linear triple (g,h,k) applied after
// `cyclic` cyclic shifts, which in turn follow the optional transpose.
// Operations live in symmetry.hpp; the struct sits here so decompositions can
// carry their claimed generators.
struct GroupElement {
    Mat<Rational> g, h, k;
    int cyclic = 0;
    bool transpose = false;
    std::string name;

    int n() const { return g.n(); }
};

template <class S>
struct Decomposition {
    int n = 0;
    std::vector<RankOneTriple<S>> terms;
    std::string name;
    std::string note;
    std::vector<GroupElement> generators;

    int rank() const { return static_cast<int>(terms.size()); }
};

using ExactDecomposition = Decomposition<Rational>;
using FloatDecomposition = Decomposition<double>;

int flat_index(int i, int j, int n);

template <class S>
Tensor3<S> matmul_tensor(int n) {
    if (n < 1) throw InvalidArgument("n must be positive");
    Tensor3<S> t(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) t.at(i * n + j, j * n + l, l * n + i) = S(1);
    return t;
}

// Throws on size mismatch, zero factor matrices, or non-finite entries.
template <class S>
void validate(const Decomposition<S>& dec) {
    if (dec.n < 1) throw InvalidArgument("decomposition n must be positive");
    for (size_t r = 0; r < dec.terms.size(); ++r) {
        const auto& t = dec.terms[r];
        const Mat<S>* ms[3] = {&t.x, &t.y, &t.z};
        for (int s = 0; s < 3; ++s) {
            if (ms[s]->n() != dec.n)
                throw DimensionError("term " + std::to_string(r) + ": matrix size differs from n");
            if (ms[s]->is_zero())
                throw InvalidArgument("term " + std::to_string(r) + ": zero matrix in slot " + "xyz"[s]);
            for (const auto& v : ms[s]->entries())
                if (!scalar_traits<S>::finite(v))
                    throw InvalidArgument("term " + std::to_string(r) + ": non-finite entry");
        }
    }
}

template <class S>
Tensor3<S> evaluate(const Decomposition<S>& dec) {
    validate(dec);
    const int m = dec.n * dec.n;
    Tensor3<S> t(m);
    for (const auto& term : dec.terms) {
        for (int a = 0; a < m; ++a) {
            if (term.x[a] == 0) continue;
            for (int b = 0; b < m; ++b) {
                if (term.y[b] == 0) continue;
                S xy = term.x[a] * term.y[b];
                for (int c = 0; c < m; ++c) {
                    if (term.z[c] == 0) continue;
                    t.at(a, b, c) += xy * term.z[c];
                }
            }
        }
    }
    return t;
}

template <class S>
struct Residual {
    Tensor3<S> tensor;
    S norm_sq;
};

template <class S>
Residual<S> residual(const Decomposition<S>& dec) {
    Tensor3<S> r = matmul_tensor<S>(dec.n) - evaluate(dec);
    S nsq = r.norm_sq();
    return {std::move(r), std::move(nsq)};
}

// Trilinear form sum_{abc} T[a,b,c] X[a] Y[b] Z[c] with flattened matrix arguments.
template <class S>
S contract(const Tensor3<S>& t, const Mat<S>& x, const Mat<S>& y, const Mat<S>& z) {
    const int m = t.m();
    if (static_cast<int>(x.size()) != m || static_cast<int>(y.size()) != m || static_cast<int>(z.size()) != m)
        throw DimensionError("contract: matrix size does not match tensor");
    S s(0);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                if (t.at(a, b, c) != 0) s += t.at(a, b, c) * x[a] * y[b] * z[c];
    return s;
}

template <class S>
S trace(const Mat<S>& a) {
    S s(0);
    for (int i = 0; i < a.n(); ++i) s += a(i, i);
    return s;
}

Decomposition<double> to_float(const Decomposition<Rational>& dec);

// Exact linear algebra on small matrices.
int rank(const Mat<Rational>& a);
Rational determinant(const Mat<Rational>& a);
std::optional<Mat<Rational>> inverse(const Mat<Rational>& a);
// Rank of a list of equal-length row vectors.
int rank_of_rows(std::vector<std::vector<Rational>> rows);

}  // namespace mmsym
