#include "mmsym/search.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace mmsym {

using nlohmann::json;

namespace {

constexpr const char* schedule_tag = "mmsym-schedule";

template <class T>
T field(const json& obj, const char* key, const T& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(where + "." + key, "wrong type");
    }
}

}  // namespace

Schedule parse_schedule(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("schedule", e.what());
    }
    if (!doc.is_object()) throw ParseError("schedule", "expected an object");
    if (doc.contains("format") && doc["format"] != schedule_tag) throw ParseError("format", "not a schedule file");
    if (!doc.contains("phases") || !doc["phases"].is_array()) throw ParseError("phases", "missing array");
    Schedule s;
    for (size_t i = 0; i < doc["phases"].size(); ++i) {
        const json& p = doc["phases"][i];
        const std::string where = "phases[" + std::to_string(i) + "]";
        if (!p.is_object()) throw ParseError(where, "expected an object");
        SchedulePhase ph;
        ph.iterations = field(p, "iterations", 0, where);
        ph.lambda = field(p, "lambda", ph.lambda, where);
        ph.zeros = field(p, "zeros", 0, where);
        ph.project_every = field(p, "project_every", ph.project_every, where);
        ph.round_attempt = field(p, "round_attempt", false, where);
        ph.tol = field(p, "tol", ph.tol, where);
        ph.label = field(p, "label", std::string(), where);
        if (p.contains("value_set")) {
            if (!p["value_set"].is_array()) throw ParseError(where + ".value_set", "expected an array");
            ph.value_set.clear();
            for (const auto& v : p["value_set"]) {
                if (v.is_number_integer())
                    ph.value_set.emplace_back(v.get<long>());
                else if (v.is_string())
                    ph.value_set.push_back(parse_rational(v.get<std::string>()));
                else
                    throw ParseError(where + ".value_set", "entries must be integers or \"p/q\" strings");
            }
        }
        if (ph.iterations < 0) throw ParseError(where + ".iterations", "must be >= 0");
        if (ph.zeros < 0) throw ParseError(where + ".zeros", "must be >= 0");
        if (ph.project_every < 0) throw ParseError(where + ".project_every", "must be >= 0");
        if (!(ph.lambda >= 0) || !std::isfinite(ph.lambda)) throw ParseError(where + ".lambda", "must be >= 0");
        s.phases.push_back(std::move(ph));
    }
    return s;
}

std::string serialize_schedule(const Schedule& s) {
    json phases = json::array();
    for (const auto& p : s.phases) {
        json vs = json::array();
        for (const auto& v : p.value_set) {
            if (v.get_den() == 1)
                vs.push_back(v.get_num().get_si());
            else
                vs.push_back(to_string(v));
        }
        json o = {{"iterations", p.iterations}, {"lambda", p.lambda},     {"zeros", p.zeros},
                  {"project_every", p.project_every}, {"round_attempt", p.round_attempt},
                  {"value_set", vs}, {"tol", p.tol}};
        if (!p.label.empty()) o["label"] = p.label;
        phases.push_back(o);
    }
    json doc = {{"format", schedule_tag}, {"version", 1}, {"phases", phases}};
    return doc.dump(2) + "\n";
}

Schedule load_schedule(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_schedule(ss.str());
}

Schedule default_schedule(int n, int R, const std::vector<Rational>& values) {
    const int total = n * n * R;
    auto z = [&](double frac) { return static_cast<int>(std::lround(frac * total)); };
    Schedule s;
    auto add = [&](int iters, double lambda, int zeros, bool round, const char* label) {
        SchedulePhase p;
        p.iterations = iters;
        p.lambda = lambda;
        p.zeros = zeros;
        p.round_attempt = round;
        p.value_set = values;
        p.label = label;
        s.phases.push_back(std::move(p));
    };
    add(100, 0.1, z(0.29), false, "ramp");
    add(200, 0.1, z(0.57), true, "sparsify");
    add(200, 1e-2, z(0.57), true, "tighten");
    add(200, 1e-3, z(0.57), true, "settle");
    return s;
}

// ---- session state -------------------------------------------------------------

int count_sparsity(const CyclicFactors& f, double threshold) {
    int count = 0;
    for (const Matrix* b : {&f.A, &f.B, &f.C, &f.D}) count += static_cast<int>((b->array().abs() < threshold).count());
    return count;
}

SessionState SessionState::from_cyclic(const CyclicFactors& f, std::uint64_t seed) {
    SessionState s;
    s.n = f.n;
    s.P = f.P;
    s.Q = f.Q;
    s.R = f.rank();
    s.seed = seed;
    s.working = assemble(f);
    s.refresh();
    return s;
}

SessionState SessionState::random(int n, int P, int Q, std::uint64_t seed) {
    CyclicFactors f = CyclicFactors::zeros(n, P, Q);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Matrix* b : {&f.A, &f.B, &f.C, &f.D})
        for (Eigen::Index j = 0; j < b->cols(); ++j)
            for (Eigen::Index i = 0; i < b->rows(); ++i) (*b)(i, j) = u(rng);
    return from_cyclic(f, seed);
}

void SessionState::refresh() {
    objective = objective_full(working);
    sparsity = count_sparsity(cyclic());
}

std::string event_record(const ScheduleEvent& e) {
    static const char* kinds[] = {"iteration", "project", "round", "phase_end"};
    json o = {{"kind", kinds[static_cast<int>(e.kind)]},
              {"iter", e.iteration},
              {"objective", e.objective},
              {"sparsity", e.sparsity},
              {"phase", e.phase}};
    if (e.round) {
        o["success"] = e.round->success;
        o["message"] = e.round->message;
    }
    return o.dump();
}

ScheduleOutcome run_schedule(SessionState state, const Schedule& schedule, const EventSink& sink,
                             std::stop_token stop) {
    ScheduleOutcome out;
    const int total = state.working.m() * state.R;
    auto emit = [&](ScheduleEvent ev) {
        if (sink) sink(ev);
        out.log.push_back(std::move(ev));
    };
    auto event = [&](ScheduleEvent::Kind kind, int phase) {
        ScheduleEvent ev;
        ev.kind = kind;
        ev.iteration = state.iteration;
        ev.objective = state.objective;
        ev.sparsity = state.sparsity;
        ev.phase = phase;
        return ev;
    };
    for (size_t pi = 0; pi < schedule.phases.size(); ++pi) {
        const SchedulePhase& ph = schedule.phases[pi];
        const int phase = static_cast<int>(pi);
        if (ph.iterations < 0 || ph.zeros < 0 || ph.zeros > total || !(ph.lambda >= 0))
            throw InvalidArgument("schedule phase " + std::to_string(pi) + ": invalid parameters");
        for (int it = 0; it < ph.iterations; ++it) {
            if (stop.stop_requested()) {
                out.cancelled = true;
                out.state = std::move(state);
                return out;
            }
            FactorMatrices& w = state.working;
            w.X = als_update(w, Slot::X, ph.lambda, build_targets(w.X, ph.zeros));
            w.Y = als_update(w, Slot::Y, ph.lambda, build_targets(w.Y, ph.zeros));
            w.Z = als_update(w, Slot::Z, ph.lambda, build_targets(w.Z, ph.zeros));
            ++state.iteration;
            bool projected = ph.project_every > 0 && state.iteration % ph.project_every == 0;
            if (projected) w = assemble(state.cyclic());
            state.refresh();
            if (state.history.size() >= state.history_capacity)
                state.history.erase(state.history.begin(),
                                    state.history.begin() + (state.history.size() - state.history_capacity + 1));
            state.history.push_back({state.iteration, state.objective, state.sparsity});
            emit(event(ScheduleEvent::Kind::iteration, phase));
            if (projected) emit(event(ScheduleEvent::Kind::project, phase));
        }
        if (ph.round_attempt) {
            ScheduleEvent ev = event(ScheduleEvent::Kind::round, phase);
            ev.round = round_decomposition(state.cyclic(), ph.value_set, ph.tol);
            out.last_round = ev.round;
            emit(std::move(ev));
        }
        emit(event(ScheduleEvent::Kind::phase_end, phase));
    }
    out.state = std::move(state);
    return out;
}

}  // namespace mmsym
