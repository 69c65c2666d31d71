#include "mmsym/graphs.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace mmsym {

namespace {

long long dot(const ProjPoint& a, const ProjPoint& b) {
    long long s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

int index_of(const std::vector<WeightedPoint>& v, const ProjPoint& p) {
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i].point == p) return static_cast<int>(i);
    throw Error("graph: vertex lookup failed");
}

}  // namespace

int IncidenceGraph::weight_divisor() const {
    for (const auto* side : {&top, &bottom})
        for (const auto& v : *side)
            if (v.occurrences % 3 != 0) return 1;
    return 3;
}

int PairingGraph::cube_edge_count() const {
    return static_cast<int>(std::count_if(edges.begin(), edges.end(), [](const PairingEdge& e) { return e.cube; }));
}

IncidenceGraph incidence_graph(const ExactDecomposition& s) {
    Configuration c = extract_configuration(s);
    IncidenceGraph g;
    g.top = std::move(c.dual_points);
    g.bottom = std::move(c.points);
    for (int i = 0; i < static_cast<int>(g.top.size()); ++i)
        for (int j = 0; j < static_cast<int>(g.bottom.size()); ++j)
            if (dot(g.top[i].point, g.bottom[j].point) == 0) g.edges.emplace_back(i, j);
    return g;
}

PairingGraph pairing_graph(const ExactDecomposition& s) {
    Configuration c = extract_configuration(s);
    PairingGraph g;
    g.top = std::move(c.dual_points);
    g.bottom = std::move(c.points);
    for (int r = 0; r < s.rank(); ++r) {
        const auto& t = s.terms[r];
        if (t.is_cube()) {
            if (rank(t.x) != 1) continue;
            auto [col, row] = rank_one_factors(t.x);
            g.edges.push_back({index_of(g.top, col), index_of(g.bottom, row), r, 3, true});
            continue;
        }
        std::map<std::pair<int, int>, int> mult;
        for (const ExactMat* m : {&t.x, &t.y, &t.z}) {
            if (rank(*m) != 1) continue;
            auto [col, row] = rank_one_factors(*m);
            ++mult[{index_of(g.top, col), index_of(g.bottom, row)}];
        }
        for (const auto& [e, k] : mult) g.edges.push_back({e.first, e.second, r, k, false});
    }
    return g;
}

namespace {

struct IsoSearch {
    const IncidenceGraph& a;
    const IncidenceGraph& b;
    std::vector<std::vector<char>> adj_a, adj_b;
    std::vector<int> deg_top_a, deg_top_b, deg_bot_a, deg_bot_b;
    std::vector<int> top_map, bot_map;
    std::vector<char> top_used, bot_used;

    IsoSearch(const IncidenceGraph& ga, const IncidenceGraph& gb) : a(ga), b(gb) {
        auto build = [](const IncidenceGraph& g, std::vector<std::vector<char>>& adj, std::vector<int>& dt,
                        std::vector<int>& db) {
            adj.assign(g.top.size(), std::vector<char>(g.bottom.size(), 0));
            dt.assign(g.top.size(), 0);
            db.assign(g.bottom.size(), 0);
            for (auto [i, j] : g.edges) {
                adj[i][j] = 1;
                ++dt[i];
                ++db[j];
            }
        };
        build(a, adj_a, deg_top_a, deg_bot_a);
        build(b, adj_b, deg_top_b, deg_bot_b);
        top_map.assign(a.top.size(), -1);
        bot_map.assign(a.bottom.size(), -1);
        top_used.assign(b.top.size(), 0);
        bot_used.assign(b.bottom.size(), 0);
    }

    bool assign_top(size_t i) {
        if (i == a.top.size()) return assign_bottom(0);
        for (size_t c = 0; c < b.top.size(); ++c) {
            if (top_used[c] || a.top[i].occurrences != b.top[c].occurrences || deg_top_a[i] != deg_top_b[c]) continue;
            top_used[c] = 1;
            top_map[i] = static_cast<int>(c);
            if (assign_top(i + 1)) return true;
            top_used[c] = 0;
        }
        top_map[i] = -1;
        return false;
    }

    bool assign_bottom(size_t j) {
        if (j == a.bottom.size()) return true;
        for (size_t c = 0; c < b.bottom.size(); ++c) {
            if (bot_used[c] || a.bottom[j].occurrences != b.bottom[c].occurrences || deg_bot_a[j] != deg_bot_b[c])
                continue;
            bool ok = true;
            for (size_t i = 0; i < a.top.size() && ok; ++i) ok = adj_a[i][j] == adj_b[top_map[i]][c];
            if (!ok) continue;
            bot_used[c] = 1;
            bot_map[j] = static_cast<int>(c);
            if (assign_bottom(j + 1)) return true;
            bot_used[c] = 0;
        }
        bot_map[j] = -1;
        return false;
    }
};

}  // namespace

std::optional<GraphBijection> graphs_isomorphic(const IncidenceGraph& a, const IncidenceGraph& b) {
    for (const auto* g : {&a, &b})
        if (static_cast<int>(g->top.size()) > max_isomorphism_side ||
            static_cast<int>(g->bottom.size()) > max_isomorphism_side)
            throw InvalidArgument("graphs_isomorphic: more than " + std::to_string(max_isomorphism_side) +
                                  " vertices on a side");
    if (a.top.size() != b.top.size() || a.bottom.size() != b.bottom.size() || a.edges.size() != b.edges.size())
        return std::nullopt;
    IsoSearch s(a, b);
    if (!s.assign_top(0)) return std::nullopt;
    return GraphBijection{s.top_map, s.bot_map};
}

namespace {

std::string weight_label(int occurrences, int divisor) { return std::to_string(occurrences / divisor); }

void write_vertices(std::ostringstream& os, const std::vector<WeightedPoint>& v, char prefix, int divisor) {
    for (size_t i = 0; i < v.size(); ++i)
        os << "  " << prefix << i << " [label=\"" << weight_label(v[i].occurrences, divisor) << "\\n"
           << point_to_string(v[i].point) << "\"];\n";
}

}  // namespace

std::string to_dot(const IncidenceGraph& g, const std::string& name) {
    std::ostringstream os;
    os << "graph \"" << name << "\" {\n";
    const int d = g.weight_divisor();
    write_vertices(os, g.top, 't', d);
    write_vertices(os, g.bottom, 'b', d);
    os << "  { rank=min; ";
    for (size_t i = 0; i < g.top.size(); ++i) os << 't' << i << "; ";
    os << "}\n  { rank=max; ";
    for (size_t i = 0; i < g.bottom.size(); ++i) os << 'b' << i << "; ";
    os << "}\n";
    for (auto [i, j] : g.edges) os << "  t" << i << " -- b" << j << ";\n";
    os << "}\n";
    return os.str();
}

std::string to_dot(const PairingGraph& g, const std::string& name) {
    std::ostringstream os;
    os << "graph \"" << name << "\" {\n";
    write_vertices(os, g.top, 't', 1);
    write_vertices(os, g.bottom, 'b', 1);
    for (const auto& e : g.edges) {
        os << "  t" << e.top << " -- b" << e.bottom << " [colorscheme=set312, color=" << (e.term % 12) + 1
           << ", term=" << e.term << ", multiplicity=" << e.multiplicity;
        if (e.cube) os << ", style=dashed";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace mmsym
