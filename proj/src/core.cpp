#include "mmsym/core.hpp"

#include <cctype>

namespace mmsym {

Rational parse_rational(const std::string& text) {
    if (text.empty()) throw ParseError("", "empty rational");
    size_t slash = text.find('/');
    auto digits_ok = [](const std::string& s, bool allow_sign) {
        size_t i = 0;
        if (allow_sign && i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
        if (i == s.size()) return false;
        for (; i < s.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        return true;
    };
    std::string num = text.substr(0, slash);
    std::string den = slash == std::string::npos ? "1" : text.substr(slash + 1);
    if (!digits_ok(num, true) || !digits_ok(den, false))
        throw ParseError("", "invalid rational \"" + text + "\"");
    if (num[0] == '+') num.erase(0, 1);
    Integer p(num, 10), q(den, 10);
    if (q == 0) throw ParseError("", "zero denominator in \"" + text + "\"");
    Rational r(p, q);
    r.canonicalize();
    return r;
}

std::string to_string(const Rational& q) {
    Rational c = q;
    c.canonicalize();
    return c.get_str(10);
}

int flat_index(int i, int j, int n) {
    if (n < 1 || i < 0 || j < 0 || i >= n || j >= n)
        throw std::out_of_range("flat_index: index out of range");
    return i * n + j;
}

Decomposition<double> to_float(const Decomposition<Rational>& dec) {
    Decomposition<double> out;
    out.n = dec.n;
    out.name = dec.name;
    out.note = dec.note;
    out.generators = dec.generators;
    auto conv = [](const Mat<Rational>& m) {
        std::vector<double> e;
        e.reserve(m.size());
        for (const auto& v : m.entries()) e.push_back(v.get_d());
        return Mat<double>(m.n(), std::move(e));
    };
    for (const auto& t : dec.terms) out.terms.push_back({conv(t.x), conv(t.y), conv(t.z)});
    return out;
}

namespace {

// Reduced row echelon form in place; returns the rank.
int row_reduce(std::vector<std::vector<Rational>>& rows) {
    if (rows.empty()) return 0;
    const size_t cols = rows[0].size();
    size_t r = 0;
    for (size_t c = 0; c < cols && r < rows.size(); ++c) {
        size_t piv = r;
        while (piv < rows.size() && rows[piv][c] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[r], rows[piv]);
        Rational inv = 1 / rows[r][c];
        for (size_t j = c; j < cols; ++j) rows[r][j] *= inv;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (i == r || rows[i][c] == 0) continue;
            Rational f = rows[i][c];
            for (size_t j = c; j < cols; ++j) rows[i][j] -= f * rows[r][j];
        }
        ++r;
    }
    return static_cast<int>(r);
}

std::vector<std::vector<Rational>> to_rows(const Mat<Rational>& a) {
    std::vector<std::vector<Rational>> rows(a.n(), std::vector<Rational>(a.n()));
    for (int i = 0; i < a.n(); ++i)
        for (int j = 0; j < a.n(); ++j) rows[i][j] = a(i, j);
    return rows;
}

}  // namespace

int rank_of_rows(std::vector<std::vector<Rational>> rows) { return row_reduce(rows); }

int rank(const Mat<Rational>& a) { return rank_of_rows(to_rows(a)); }

Rational determinant(const Mat<Rational>& a) {
    auto rows = to_rows(a);
    const int n = a.n();
    Rational det = 1;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        while (piv < n && rows[piv][c] == 0) ++piv;
        if (piv == n) return 0;
        if (piv != c) {
            std::swap(rows[piv], rows[c]);
            det = -det;
        }
        det *= rows[c][c];
        for (int i = c + 1; i < n; ++i) {
            if (rows[i][c] == 0) continue;
            Rational f = rows[i][c] / rows[c][c];
            for (int j = c; j < n; ++j) rows[i][j] -= f * rows[c][j];
        }
    }
    return det;
}

std::optional<Mat<Rational>> inverse(const Mat<Rational>& a) {
    const int n = a.n();
    std::vector<std::vector<Rational>> rows(n, std::vector<Rational>(2 * n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) rows[i][j] = a(i, j);
        rows[i][n + i] = 1;
    }
    row_reduce(rows);
    Mat<Rational> inv(n);
    for (int i = 0; i < n; ++i) {
        if (rows[i][i] != 1) return std::nullopt;
        for (int j = 0; j < n; ++j) inv(i, j) = rows[i][n + j];
    }
    return inv;
}

}  // namespace mmsym
