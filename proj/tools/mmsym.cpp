// mmsym: verification, symmetry analysis, invariant dimensions, batch search and
// the steering server for rank decompositions of M<n>.
#include "mmsym/catalog.hpp"
#include "mmsym/graphs.hpp"
#include "mmsym/invariant.hpp"
#include "mmsym/kernels.hpp"
#include "mmsym/search.hpp"
#include "mmsym/session.hpp"
#include "mmsym/symmetry.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mmsym;
using nlohmann::json;

namespace {

enum Exit { ok = 0, verified_false = 1, usage = 2, internal = 3 };

bool records = false;

void emit(const json& record) { std::cout << record.dump() << "\n"; }

std::string triple_key(const std::array<int, 3>& t) {
    return std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A named element (a0conj, pi, ...) or an element file.
GroupElement element_arg(const std::string& arg, int n) {
    const auto& names = named_element_names();
    if (std::find(names.begin(), names.end(), arg) != names.end()) {
        GroupElement e = named_element(arg);
        if (e.n() != n)
            throw InvalidArgument("element '" + arg + "' acts on n=" + std::to_string(e.n()) + ", decomposition has n=" +
                                  std::to_string(n));
        return e;
    }
    return parse_element(read_file(arg), n);
}

// "declared", a comma list of named elements, or a file holding an array of
// elements (or {"generators": [...]}).
std::vector<GroupElement> generators_arg(const std::string& arg, const ExactDecomposition& dec) {
    if (arg == "declared") {
        if (dec.generators.empty()) throw InvalidArgument(dec.name + " declares no generators");
        return dec.generators;
    }
    std::vector<GroupElement> gens;
    if (std::filesystem::exists(arg)) {
        json doc = json::parse(read_file(arg));
        if (doc.is_object() && doc.contains("generators")) doc = doc["generators"];
        if (!doc.is_array()) throw InvalidArgument(arg + ": expected an array of elements");
        for (const auto& g : doc) gens.push_back(g.is_string() ? element_arg(g.get<std::string>(), dec.n)
                                                               : parse_element(g.dump(), dec.n));
        return gens;
    }
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) gens.push_back(element_arg(item, dec.n));
    if (gens.empty()) throw InvalidArgument("no generators given");
    return gens;
}

std::string weight_string(int occurrences, int divisor) {
    return divisor == 1 && occurrences % 3 != 0 ? std::to_string(occurrences) + "/3"
                                                : std::to_string(occurrences / divisor);
}

// ---- verify ----------------------------------------------------------------

int cmd_verify(const std::string& src) {
    ExactDecomposition dec = load_source(src);
    auto res = residual(dec);
    auto parts = rank_triple_partition(dec);
    bool exact = res.norm_sq == 0;
    if (records) {
        json counts = json::object();
        for (const auto& [k, v] : parts) counts[triple_key(k)] = v.size();
        emit({{"command", "verify"},
              {"source", src},
              {"name", dec.name},
              {"n", dec.n},
              {"terms", dec.rank()},
              {"residual_norm_sq", to_string(res.norm_sq)},
              {"exact", exact},
              {"rank_triples", counts}});
    } else {
        std::cout << (dec.name.empty() ? src : dec.name) << ": " << dec.rank() << " terms, residual "
                  << (exact ? "0" : "nonzero (norm^2 " + to_string(res.norm_sq) + ")") << "\n";
        for (const auto& [k, v] : parts) std::cout << "  rank triple (" << triple_key(k) << "): " << v.size() << "\n";
    }
    return exact ? ok : verified_false;
}

// ---- analyze -----------------------------------------------------------------

struct AnalyzeFlags {
    std::string graphs_dir;
    bool charpolys = false;
    std::string orbits;
    bool config = false;
};

json points_json(const std::vector<WeightedPoint>& pts) {
    json out = json::array();
    for (const auto& p : pts) out.push_back({{"point", p.point}, {"occurrences", p.occurrences}});
    return out;
}

int cmd_analyze(const std::string& src, const AnalyzeFlags& f) {
    ExactDecomposition dec = load_source(src);
    const std::string name = dec.name.empty() ? "decomposition" : dec.name;
    json rec = {{"command", "analyze"}, {"source", src}, {"name", name}, {"terms", dec.rank()}};
    bool any = false;

    if (!f.graphs_dir.empty()) {
        any = true;
        std::filesystem::create_directories(f.graphs_dir);
        IncidenceGraph ig = incidence_graph(dec);
        PairingGraph pg = pairing_graph(dec);
        auto inc_path = std::filesystem::path(f.graphs_dir) / (name + "_incidence.dot");
        auto pair_path = std::filesystem::path(f.graphs_dir) / (name + "_pairing.dot");
        std::ofstream(inc_path) << to_dot(ig, name + "_incidence");
        std::ofstream(pair_path) << to_dot(pg, name + "_pairing");
        rec["incidence"] = {{"file", inc_path.string()},
                            {"top", points_json(ig.top)},
                            {"bottom", points_json(ig.bottom)},
                            {"edges", ig.edges.size()}};
        rec["pairing"] = {{"file", pair_path.string()}, {"edges", pg.edges.size()}, {"cube_edges", pg.cube_edge_count()}};
        if (!records) {
            const int d = ig.weight_divisor();
            std::cout << "incidence graph: " << ig.top.size() << " + " << ig.bottom.size() << " vertices, "
                      << ig.edges.size() << " edges -> " << inc_path.string() << "\n";
            for (const auto& p : ig.top)
                std::cout << "  top    " << point_to_string(p.point) << "  weight " << weight_string(p.occurrences, d)
                          << "\n";
            for (const auto& p : ig.bottom)
                std::cout << "  bottom " << point_to_string(p.point) << "  weight " << weight_string(p.occurrences, d)
                          << "\n";
            std::cout << "pairing graph: " << pg.edges.size() << " edges, " << pg.cube_edge_count()
                      << " cube edges -> " << pair_path.string() << "\n";
        }
    }

    if (f.charpolys) {
        any = true;
        Fingerprint fp = fingerprint(dec);
        // Tables list non-cube terms per Z3 orbit when every count allows it.
        bool per_orbit = !fp.triples.empty();
        for (const auto& [k, c] : fp.triples) per_orbit = per_orbit && c % 3 == 0;
        const int div = per_orbit ? 3 : 1;
        json sym = json::array(), tri = json::array();
        for (const auto& [p, c] : fp.symmetric) sym.push_back({{"poly", poly_to_string(p)}, {"count", c}});
        for (const auto& [t, c] : fp.triples)
            tri.push_back({{"polys", {poly_to_string(t[0]), poly_to_string(t[1]), poly_to_string(t[2])}},
                           {"count", c / div}});
        rec["charpolys"] = {{"symmetric", sym}, {"triples", tri}, {"triples_per_orbit", per_orbit}};
        if (!records) {
            std::cout << "symmetric terms (x = y = z):\n";
            for (const auto& s : sym) std::cout << "  " << s["poly"].get<std::string>() << "  x" << s["count"] << "\n";
            std::cout << "other terms" << (per_orbit ? " (per Z3 orbit)" : "") << ":\n";
            for (const auto& t : tri)
                std::cout << "  {" << t["polys"][0].get<std::string>() << ", " << t["polys"][1].get<std::string>()
                          << ", " << t["polys"][2].get<std::string>() << "}  x" << t["count"] << "\n";
        }
    }

    if (!f.orbits.empty()) {
        any = true;
        auto gens = generators_arg(f.orbits, dec);
        auto parts = orbit_partition(dec, gens);
        auto sizes = orbit_sizes(parts);
        json orbs = json::array();
        for (const auto& o : parts) orbs.push_back(o);
        rec["orbits"] = {{"sizes", sizes}, {"members", orbs}, {"group_order", group_closure(gens).size()}};
        if (!records) {
            std::cout << "orbits under " << gens.size() << " generators (group order " << group_closure(gens).size()
                      << "): sizes";
            for (int s : sizes) std::cout << " " << s;
            std::cout << "\n";
        }
    }

    if (f.config) {
        any = true;
        Configuration c = extract_configuration(dec);
        rec["configuration"] = {{"points", points_json(c.points)}, {"dual_points", points_json(c.dual_points)}};
        if (!records) {
            std::cout << "points of PU (row factors):\n";
            for (const auto& p : c.points)
                std::cout << "  " << point_to_string(p.point) << "  x" << p.occurrences << "\n";
            std::cout << "points of PU* (column factors):\n";
            for (const auto& p : c.dual_points)
                std::cout << "  " << point_to_string(p.point) << "  x" << p.occurrences << "\n";
        }
    }

    if (!any) {
        auto res = residual(dec);
        auto parts = rank_triple_partition(dec);
        json counts = json::object();
        for (const auto& [k, v] : parts) counts[triple_key(k)] = v.size();
        rec["exact"] = res.norm_sq == 0;
        rec["rank_triples"] = counts;
        if (!records) {
            std::cout << name << ": " << dec.rank() << " terms, residual " << (res.norm_sq == 0 ? "0" : "nonzero")
                      << "\n";
            for (const auto& [k, v] : parts) std::cout << "  rank triple (" << triple_key(k) << "): " << v.size() << "\n";
        }
    }
    if (records) emit(rec);
    return ok;
}

// ---- dims --------------------------------------------------------------------

int cmd_dims(int n, const std::string& group, bool check, bool components) {
    if (n < 1) throw InvalidArgument("--n must be positive");
    bool all_match = true;
    auto report = [&](const std::string& g, long long closed, std::optional<long long> rank, json extra) {
        json rec = {{"command", "dims"}, {"n", n}, {"group", g}, {"dim", closed}};
        rec.update(extra);
        if (rank) {
            rec["projector_rank"] = *rank;
            rec["match"] = *rank == closed;
            all_match = all_match && *rank == closed;
        }
        if (records) return emit(rec);
        std::cout << g << ": " << closed;
        if (extra.contains("sym"))
            std::cout << " (S^3 " << extra["sym"] << " + Lambda^3 " << extra["alt"] << ")";
        std::cout << "\n";
        if (rank)
            std::cout << "  closed-form " << closed << (*rank == closed ? " = " : " != ") << "projector rank " << *rank
                      << "\n";
    };
    const bool every = group.empty();
    if (every || group == "z3") {
        long long m = static_cast<long long>(n) * n;
        std::optional<long long> rank;
        if (check) rank = cyclic_projector_rank(static_cast<int>(m));
        report("z3", z3_invariant_dim(m), rank, json::object());
    }
    if (every || group == "zn1") {
        std::optional<long long> rank;
        if (check) rank = group_projector_rank(znp1_group(n));
        report("zn1", znp1_invariant_dim(n), rank, {{"table_sum", znp1_invariant_dim_table(n)}});
    }
    if (every || group == "zn1xz3") {
        SymAltDims d = znp1_z3_invariant_dim(n);
        std::optional<long long> rank;
        if (check) rank = group_projector_rank(znp1_z3_group(n));
        json summands = json::array();
        for (const auto& s : znp1_z3_summands(n))
            summands.push_back({{"weights", s.weights},
                                {"sym", s.sym_dim},
                                {"alt", s.alt_dim},
                                {"sym_label", s.sym_label},
                                {"alt_label", s.alt_label}});
        report("zn1xz3", d.total, rank, {{"sym", d.sym}, {"alt", d.alt}, {"summands", summands}});
    }
    if (components) {
        if (n != 3) throw InvalidArgument("--components is only defined for n = 3");
        auto norms = m3_component_norms();
        Rational total = 0;
        json out = json::object();
        for (const auto& [label, v] : norms) {
            total += v;
            out[label] = to_string(v);
        }
        if (records) {
            emit({{"command", "dims"}, {"n", 3}, {"components", out}, {"total", to_string(total)}});
        } else {
            std::cout << "squared norms of the M<3> components:\n";
            for (const auto& [label, v] : norms) std::cout << "  " << label << ": " << to_string(v) << "\n";
            std::cout << "  total: " << to_string(total) << "\n";
        }
    }
    if (!every && group != "z3" && group != "zn1" && group != "zn1xz3")
        throw InvalidArgument("--group must be z3, zn1 or zn1xz3");
    return all_match ? ok : verified_false;
}

// ---- search ------------------------------------------------------------------

struct SearchFlags {
    int n = 2, R = 7, P = 1, Q = 2;
    int restarts = 1;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string schedule, out, report, values = "0,1,-1";
    int phase1_iterations = 400;
    double converge = 1e-6;
};

int cmd_search(const SearchFlags& f) {
    if (f.n < 1) throw InvalidArgument("--n must be positive");
    if (f.P < 0 || f.Q < 0 || f.P + 3 * f.Q != f.R)
        throw InvalidArgument("--p + 3 --q must equal --rank (" + std::to_string(f.P) + " + 3*" + std::to_string(f.Q) +
                              " != " + std::to_string(f.R) + ")");
    if (f.restarts < 0) throw InvalidArgument("--restarts must be >= 0");
    SearchOptions opts;
    opts.n = f.n;
    opts.R = f.R;
    opts.P = f.P;
    opts.Q = f.Q;
    opts.restarts = f.restarts;
    opts.seed = f.seed;
    opts.jobs = f.jobs;
    opts.converge = f.converge;
    opts.phase1.max_iterations = f.phase1_iterations;
    auto values = parse_value_set(f.values);
    opts.schedule = f.schedule.empty() ? default_schedule(f.n, f.R, values) : load_schedule(f.schedule);

    SearchReport rep = search(opts);
    json runs = json::array();
    for (const auto& r : rep.restarts)
        runs.push_back({{"seed", r.seed},
                        {"phase1_objective", r.phase1_objective},
                        {"phase1_converged", r.phase1_converged},
                        {"final_objective", r.final_objective},
                        {"exact", r.exact}});
    json report = {{"command", "search"}, {"n", f.n},   {"rank", f.R},         {"P", f.P},
                   {"Q", f.Q},            {"seed", f.seed}, {"restarts", runs}, {"best", nullptr}};
    const RestartReport* best = rep.best ? &rep.restarts[*rep.best] : nullptr;
    if (best) report["best"] = runs[*rep.best];
    if (best && best->exact && !f.out.empty()) {
        ExactDecomposition dec = *best->decomposition;
        dec.name = "search_n" + std::to_string(f.n) + "_r" + std::to_string(dec.rank()) + "_seed" +
                   std::to_string(best->seed);
        dec.note = "found by search with P=" + std::to_string(f.P) + ", Q=" + std::to_string(f.Q);
        save(dec, f.out);
        report["out"] = f.out;
    }
    const std::string report_path = !f.report.empty() ? f.report : (f.out.empty() ? "" : f.out + ".report.json");
    if (!report_path.empty()) std::ofstream(report_path) << report.dump(2) << "\n";

    if (records) {
        emit(report);
    } else {
        std::cout << "restarts run: " << rep.restarts.size() << "\n";
        for (const auto& r : rep.restarts)
            std::cout << "  seed " << r.seed << ": phase 1 objective " << r.phase1_objective
                      << (r.phase1_converged ? ", final " + std::to_string(r.final_objective) : "")
                      << (r.exact ? ", exact" : "") << "\n";
        if (best && best->exact)
            std::cout << "exact rank-" << best->decomposition->rank() << " decomposition from seed " << best->seed
                      << (f.out.empty() ? "" : " -> " + f.out) << "\n";
        else
            std::cout << "no exact decomposition found\n";
    }
    if (f.restarts == 0) return ok;
    return best && best->exact ? ok : verified_false;
}

// ---- transform / equal ---------------------------------------------------------

int cmd_transform(const std::string& src, const std::string& element, const std::string& out) {
    ExactDecomposition dec = load_source(src);
    GroupElement e = element_arg(element, dec.n);
    ExactDecomposition t = apply_element(e, dec);
    t.name = dec.name.empty() ? "transformed" : dec.name + "_transformed";
    t.generators.clear();
    const bool fixed = decompositions_equal(t, dec);
    if (!out.empty()) save(t, out);
    if (records)
        emit({{"command", "transform"}, {"source", src}, {"element", element}, {"terms", t.rank()},
              {"equal_to_source", fixed}, {"out", out}});
    else
        std::cout << "applied " << element << " to " << t.rank() << " terms"
                  << (fixed ? " (the decomposition is preserved)" : "") << (out.empty() ? "" : " -> " + out) << "\n";
    return ok;
}

int cmd_equal(const std::string& a, const std::string& b) {
    bool eq = decompositions_equal(load_source(a), load_source(b));
    if (records)
        emit({{"command", "equal"}, {"a", a}, {"b", b}, {"equal", eq}});
    else
        std::cout << (eq ? "equal" : "not equal") << "\n";
    return eq ? ok : verified_false;
}

// ---- serve -------------------------------------------------------------------

struct ServeFlags {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string session;
    std::string output_dir = ".";
    int n = 2, P = 1, Q = 2;
    std::uint64_t seed = 0;
    bool empty = false;
};

int cmd_serve(const ServeFlags& f) {
    // Block the stop signals before any thread starts so sigwait sees them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    SessionConfig cfg;
    cfg.n = f.n;
    cfg.P = f.P;
    cfg.Q = f.Q;
    cfg.seed = f.seed;
    cfg.output_dir = f.output_dir;
    cfg.start_empty = f.empty || !f.session.empty();
    Session session(cfg);
    if (!f.session.empty()) {
        auto r = session.submit({{"type", "LoadFactors"}, {"file", f.session}});
        if (r.status != 202) throw InvalidArgument("cannot load session " + f.session + ": " + r.reason);
        session.wait_idle();
    }
    SessionServer server(session);
    if (!server.bind(f.host, f.port)) {
        std::cerr << "error: cannot listen on " << f.host << ":" << f.port << " (address in use?)\n";
        return usage;
    }
    server.start();
    if (records)
        emit({{"command", "serve"}, {"host", f.host}, {"port", server.port()}});
    else
        std::cout << "serving on http://" << f.host << ":" << server.port() << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    session.shutdown();
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rank decompositions of the matrix multiplication tensor"};
    app.require_subcommand(1);
    std::string format = "text";
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "records"}));
    std::string isa;
    app.add_option("--kernels", isa, "Force the float kernel variant")->check(CLI::IsMember({"scalar", "avx2"}));

    std::string src, src_b, out, element;
    auto* verify = app.add_subcommand("verify", "Exact verification of a decomposition");
    verify->add_option("source", src, "File or builtin:NAME")->required();

    AnalyzeFlags af;
    auto* analyze = app.add_subcommand("analyze", "Graphs, fingerprints, orbits and point configurations");
    analyze->add_option("source", src, "File or builtin:NAME")->required();
    analyze->add_option("--graphs", af.graphs_dir, "Write incidence and pairing DOT files to DIR");
    analyze->add_flag("--charpolys", af.charpolys, "Characteristic-polynomial table");
    analyze->add_option("--orbits", af.orbits, "Generators: 'declared', a comma list of names, or a file");
    analyze->add_flag("--config", af.config, "Projective point configuration");

    int dims_n = 0;
    std::string group;
    bool check = false, components = false;
    auto* dims = app.add_subcommand("dims", "Invariant-space dimensions");
    dims->add_option("--n", dims_n, "Matrix size")->required();
    dims->add_option("--group", group, "z3, zn1 or zn1xz3 (default: all)")
        ->check(CLI::IsMember({"z3", "zn1", "zn1xz3"}));
    dims->add_flag("--check-projector", check, "Confirm by the exact rank of the averaging projector");
    dims->add_flag("--components", components, "Squared norms of the M<3> isotypic components (n = 3)");

    SearchFlags sf;
    auto* srch = app.add_subcommand("search", "Batch two-phase search");
    srch->add_option("--n", sf.n, "Matrix size");
    srch->add_option("--rank", sf.R, "Number of terms R");
    srch->add_option("--p", sf.P, "Number of cube terms P");
    srch->add_option("--q", sf.Q, "Number of cyclic orbits Q");
    srch->add_option("--restarts", sf.restarts, "Number of seeded restarts");
    srch->add_option("--seed", sf.seed, "First seed");
    srch->add_option("--jobs", sf.jobs, "Parallel restarts")->check(CLI::PositiveNumber);
    srch->add_option("--schedule", sf.schedule, "Schedule file (default: built-in sparsify ramp)");
    srch->add_option("--values", sf.values, "Rounding value set, e.g. 0,1,-1,1/2,-1/2");
    srch->add_option("--phase1-iterations", sf.phase1_iterations, "Phase 1 iteration budget");
    srch->add_option("--converge", sf.converge, "Phase 1 objective needed to continue");
    srch->add_option("--out", sf.out, "Write the exact decomposition here");
    srch->add_option("--report", sf.report, "Run report path (default: OUT.report.json)");

    auto* transform = app.add_subcommand("transform", "Apply a group element");
    transform->add_option("source", src, "File or builtin:NAME")->required();
    transform->add_option("--element", element, "Element name or element file")->required();
    transform->add_option("--out", out, "Output file");

    auto* equal = app.add_subcommand("equal", "Equality up to term order and scaling");
    equal->add_option("a", src, "File or builtin:NAME")->required();
    equal->add_option("b", src_b, "File or builtin:NAME")->required();

    auto* list = app.add_subcommand("list", "Builtin decompositions and named elements");

    ServeFlags vf;
    auto* serve = app.add_subcommand("serve", "Run the steering session server");
    serve->add_option("--port", vf.port, "Port (0 picks a free one)");
    serve->add_option("--host", vf.host, "Bind address");
    serve->add_option("--session", vf.session, "Saved factor file to start from");
    serve->add_option("--output-dir", vf.output_dir, "Where successful round attempts are written");
    serve->add_option("--n", vf.n, "Matrix size for a fresh session");
    serve->add_option("--p", vf.P, "Cube terms for a fresh session");
    serve->add_option("--q", vf.Q, "Cyclic orbits for a fresh session");
    serve->add_option("--seed", vf.seed, "Seed for a fresh session");
    serve->add_flag("--empty", vf.empty, "Start without a session");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? ok : usage;
    }
    records = format == "records";

    try {
        if (!isa.empty()) kernels::set_isa(isa == "avx2" ? kernels::Isa::avx2 : kernels::Isa::scalar);
        if (*verify) return cmd_verify(src);
        if (*analyze) return cmd_analyze(src, af);
        if (*dims) return cmd_dims(dims_n, group, check, components);
        if (*srch) return cmd_search(sf);
        if (*transform) return cmd_transform(src, element, out);
        if (*equal) return cmd_equal(src, src_b);
        if (*serve) return cmd_serve(vf);
        if (*list) {
            if (records) {
                emit({{"command", "list"}, {"builtins", builtin_names()}, {"fixtures", builtin_fixture_names()},
                      {"elements", named_element_names()}});
            } else {
                std::cout << "builtins:";
                for (const auto& s : builtin_names()) std::cout << " " << s;
                std::cout << "\nfixtures:";
                for (const auto& s : builtin_fixture_names()) std::cout << " " << s;
                std::cout << "\nelements:";
                for (const auto& s : named_element_names()) std::cout << " " << s;
                std::cout << "\n";
            }
            return ok;
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const ModeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return internal;
    }
    return internal;
}
