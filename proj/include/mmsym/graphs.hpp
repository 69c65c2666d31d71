#pragma once

#include "mmsym/symmetry.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mmsym {

// Top vertices: column factors (vectors); bottom vertices: row factors (functionals).
// Vertices are ordered by occurrence count descending, then by representative.
struct IncidenceGraph {
    std::vector<WeightedPoint> top, bottom;
    std::vector<std::pair<int, int>> edges;  // (top, bottom), sorted

    // Figure weights: occurrences divided by 3 when every count is a multiple of 3.
    int weight_divisor() const;
    int top_weight(int i) const { return top[i].occurrences / weight_divisor(); }
    int bottom_weight(int i) const { return bottom[i].occurrences / weight_divisor(); }
};

struct PairingEdge {
    int top = 0, bottom = 0;
    int term = 0;          // color
    int multiplicity = 1;  // 3 for a rank-one cube
    bool cube = false;
};

struct PairingGraph {
    std::vector<WeightedPoint> top, bottom;
    std::vector<PairingEdge> edges;

    int cube_edge_count() const;
};

IncidenceGraph incidence_graph(const ExactDecomposition& s);
PairingGraph pairing_graph(const ExactDecomposition& s);

struct GraphBijection {
    std::vector<int> top, bottom;  // vertex i of the first graph maps to top[i] / bottom[i]
};

constexpr int max_isomorphism_side = 10;

// Lexicographically smallest weight- and edge-preserving bijection, if any.
// Throws InvalidArgument when either side exceeds max_isomorphism_side.
std::optional<GraphBijection> graphs_isomorphic(const IncidenceGraph& a, const IncidenceGraph& b);

std::string to_dot(const IncidenceGraph& g, const std::string& name);
std::string to_dot(const PairingGraph& g, const std::string& name);

}  // namespace mmsym
