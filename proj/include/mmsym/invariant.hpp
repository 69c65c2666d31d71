#pragma once

#include "mmsym/core.hpp"
#include "mmsym/symmetry.hpp"

#include <array>
#include <map>
#include <stop_token>
#include <string>
#include <vector>

namespace mmsym {

// ---- closed-form dimensions ----------------------------------------------

long long z3_invariant_dim(long long m);
long long znp1_invariant_dim(int n);
// Same quantity summed over the weight table: n^3 + 3n * n(n-1)^2 + n(n-1)(n-1)^3.
long long znp1_invariant_dim_table(int n);

// One summand of (S^3 A)^{Z_{n+1}} + (Lambda^3 A)^{Z_{n+1}}: a weight multiset
// alpha <= beta <= gamma with alpha + beta + gamma = 0 mod n+1.
struct WeightSummand {
    std::array<int, 3> weights;
    long long sym_dim = 0;
    long long alt_dim = 0;
    std::string sym_label, alt_label;
};

std::vector<WeightSummand> znp1_z3_summands(int n);

struct SymAltDims {
    long long sym = 0, alt = 0, total = 0;
};
SymAltDims znp1_z3_invariant_dim(int n);

// ---- isotypic structure ---------------------------------------------------

// For each weight u in 0..n, flat indices (i*n + j) of the eigenbasis pairs with
// i - j = u mod n+1 (eigenbasis indices 1..n stored 0-based).
std::vector<std::vector<int>> isotypic_index(int n);

// Order-(n+1) matrix: companion of 1 + t + ... + t^n. For n = 3 this is a0.
ExactMat znp1_generator(int n);

std::vector<GroupElement> znp1_group(int n);
std::vector<GroupElement> znp1_z3_group(int n);

// ---- averaging projectors -------------------------------------------------

template <class S>
Tensor3<S> cyclic_average(const Tensor3<S>& t) {
    const int m = t.m();
    Tensor3<S> r(m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c) r.at(a, b, c) = (t.at(a, b, c) + t.at(c, a, b) + t.at(b, c, a)) / S(3);
    return r;
}

// Mean of the translates e.T. Throws InvalidArgument if the list is not closed
// under composition. Requires m = n^2 for the elements' n.
Tensor3<Rational> group_average(const Tensor3<Rational>& t, const std::vector<GroupElement>& elements);
Tensor3<double> group_average(const Tensor3<double>& t, const std::vector<GroupElement>& elements);

void check_closed(const std::vector<GroupElement>& elements);

// Rank of the averaging projector on (C^m)^{x3}, by exact elimination. Throws
// Cancelled if the token is triggered.
long long cyclic_projector_rank(int m, std::stop_token stop = {});
long long group_projector_rank(const std::vector<GroupElement>& elements, std::stop_token stop = {});

// ---- M<3> components -------------------------------------------------------

// Squared norms of the projections of M<3> onto every Z4 x Z3 summand, keyed by
// label. Uses an orthogonal order-4 generator so the components are orthogonal.
std::map<std::string, Rational> m3_component_norms(std::stop_token stop = {});

}  // namespace mmsym
