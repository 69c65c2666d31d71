#pragma once

#include "mmsym/core.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mmsym {

using ExactMat = Mat<Rational>;
using ExactTriple = RankOneTriple<Rational>;

// ---- group elements -------------------------------------------------------

GroupElement identity_element(int n);
GroupElement cyclic_element(int n, int power = 1);
GroupElement transpose_element(int n);
// Throws SingularError if any of g, h, k is singular.
GroupElement linear_element(ExactMat g, ExactMat h, ExactMat k, std::string name = {});
GroupElement conjugation_element(const ExactMat& a, std::string name = {});

void check_invertible(const GroupElement& e);

// compose(a, b) acts as a after b.
GroupElement compose(const GroupElement& a, const GroupElement& b);
GroupElement inverse(const GroupElement& e);
GroupElement power(const GroupElement& e, int k);

// Same action on rank-one tensors: g, h, k compared up to independent scalars.
bool same_element(const GroupElement& a, const GroupElement& b);

// Elements of the group generated by `gens`; throws if more than `limit` are found.
std::vector<GroupElement> group_closure(const std::vector<GroupElement>& gens, size_t limit = 10000);

ExactTriple apply_element(const GroupElement& e, const ExactTriple& t);
ExactDecomposition apply_element(const GroupElement& e, const ExactDecomposition& s);

ExactDecomposition standard_decomposition(int n);
bool is_tensor_symmetry(const GroupElement& e, int n);

// ---- equality and orbits --------------------------------------------------

// x and y scaled to have first nonzero entry 1, compensating factor moved into z.
struct CanonicalTriple {
    ExactMat x, y, z;
    friend bool operator==(const CanonicalTriple& a, const CanonicalTriple& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
    friend bool operator<(const CanonicalTriple& a, const CanonicalTriple& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.z < b.z;
    }
};

CanonicalTriple canonical(const ExactTriple& t);
bool decompositions_equal(const ExactDecomposition& a, const ExactDecomposition& b);
bool is_decomposition_symmetry(const GroupElement& e, const ExactDecomposition& s);

// Orbits of term indices under the group generated by `gens`, each sorted, ordered
// by smallest member. Throws InvalidArgument naming the first term whose image is
// not in the decomposition.
std::vector<std::vector<int>> orbit_partition(const ExactDecomposition& s, const std::vector<GroupElement>& gens);

std::vector<int> orbit_sizes(const std::vector<std::vector<int>>& partition);

std::map<std::array<int, 3>, std::vector<int>> rank_triple_partition(const ExactDecomposition& s);

// ---- fingerprints ---------------------------------------------------------

// Monic characteristic polynomial det(tI - M), coefficients from t^n down to t^0.
using Poly = std::vector<Rational>;

Poly charpoly(const ExactMat& m);
std::string poly_to_string(const Poly& p);

struct Fingerprint {
    std::map<Poly, int> symmetric;
    std::map<std::array<Poly, 3>, int> triples;  // sorted polynomial triples, one count per term
};

Fingerprint fingerprint(const ExactDecomposition& s);

// ---- point configurations -------------------------------------------------

using ProjPoint = std::vector<long long>;

// Primitive integer representative with first nonzero coordinate positive.
ProjPoint projective_canonical(const std::vector<Rational>& v);
std::string point_to_string(const ProjPoint& p);

// For a rank-one matrix u v^T: column factor u and row factor v. Throws otherwise.
std::pair<ProjPoint, ProjPoint> rank_one_factors(const ExactMat& m);

struct WeightedPoint {
    ProjPoint point;
    int occurrences = 0;
};

struct Configuration {
    std::vector<WeightedPoint> points;       // row factors, points of PU
    std::vector<WeightedPoint> dual_points;  // column factors, points of PU*
};

Configuration extract_configuration(const ExactDecomposition& s);

// Projective map g with g p_i ~ u_i for the default framing e1, e2, e3, (-1,-1,-1).
// Returned as the conjugation element (g, g, g).
GroupElement normalize_framing(const std::vector<std::vector<Rational>>& points);
std::vector<ProjPoint> apply_to_points(const GroupElement& e, const std::vector<std::vector<Rational>>& points);
std::vector<std::vector<Rational>> default_framing(int n);

}  // namespace mmsym
