#include "mmsym/catalog.hpp"
#include "mmsym/search.hpp"
#include "mmsym/symmetry.hpp"
#include "recovery.hpp"

#include <doctest.h>
#include <json.hpp>

#include <stop_token>

using namespace mmsym;

TEST_CASE("a zero-iteration schedule only logs") {
    auto state = SessionState::random(2, 1, 2, 3);
    Schedule s;
    s.phases.push_back(SchedulePhase{});
    auto out = run_schedule(state, s);
    REQUIRE(out.log.size() == 1);
    CHECK(out.log[0].kind == ScheduleEvent::Kind::phase_end);
    CHECK(out.state.iteration == 0);
    CHECK(out.state.working.X == state.working.X);
    CHECK(out.state.objective == state.objective);
    CHECK(out.state.history.empty());
}

TEST_CASE("plain ALS never increases the objective") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto state = SessionState::random(2, 1, 2, seed);
        Schedule s;
        SchedulePhase p;
        p.iterations = 10;
        p.lambda = 0;
        p.project_every = 0;
        s.phases.push_back(p);
        double prev = state.objective;
        int iterations = 0;
        run_schedule(state, s, [&](const ScheduleEvent& e) {
            if (e.kind != ScheduleEvent::Kind::iteration) return;
            ++iterations;
            CHECK(e.objective <= prev + 1e-10);
            prev = e.objective;
        });
        CHECK(iterations == 10);
    }
}

TEST_CASE("events, history and projection cadence") {
    auto state = SessionState::random(2, 1, 2, 4);
    state.history_capacity = 8;
    Schedule s;
    SchedulePhase p;
    p.iterations = 12;
    p.project_every = 5;
    p.zeros = 4;
    s.phases.push_back(p);
    p.iterations = 0;
    p.round_attempt = true;
    s.phases.push_back(p);
    auto out = run_schedule(state, s);
    int iters = 0, projects = 0, rounds = 0, ends = 0;
    for (const auto& e : out.log) {
        switch (e.kind) {
            case ScheduleEvent::Kind::iteration: ++iters; break;
            case ScheduleEvent::Kind::project:
                ++projects;
                CHECK(e.iteration % 5 == 0);
                break;
            case ScheduleEvent::Kind::round:
                ++rounds;
                CHECK(e.round.has_value());
                break;
            case ScheduleEvent::Kind::phase_end: ++ends; break;
        }
    }
    CHECK(iters == 12);
    CHECK(projects == 2);
    CHECK(rounds == 1);
    CHECK(ends == 2);
    CHECK(out.last_round.has_value());
    CHECK(out.state.iteration == 12);
    REQUIRE(out.state.history.size() == 8);
    CHECK(out.state.history.front().iteration == 5);
    CHECK(out.state.history.back().iteration == 12);
    CHECK(std::abs(out.state.objective - objective_full(out.state.working)) <= 1e-10 * (1 + out.state.objective));

    auto rec = nlohmann::json::parse(event_record(out.log.front()));
    CHECK(rec["kind"] == "iteration");
    CHECK(rec["iter"] == 1);
    CHECK(rec.contains("objective"));
    CHECK(rec.contains("sparsity"));
}

TEST_CASE("runs are deterministic and cancellable") {
    auto state = SessionState::random(2, 1, 2, 9);
    auto sched = default_schedule(2, 7, default_value_set());
    auto a = run_schedule(state, sched), b = run_schedule(state, sched);
    CHECK(a.state.working.X == b.state.working.X);
    CHECK(a.state.objective == b.state.objective);
    CHECK(a.log.size() == b.log.size());

    std::stop_source src;
    int seen = 0;
    auto c = run_schedule(state, sched, [&](const ScheduleEvent& e) {
        if (e.kind == ScheduleEvent::Kind::iteration && ++seen == 7) src.request_stop();
    }, src.get_token());
    CHECK(c.cancelled);
    CHECK(c.state.iteration == 7);
}

TEST_CASE("invalid phases are rejected") {
    auto state = SessionState::random(2, 1, 2, 1);
    Schedule s;
    SchedulePhase p;
    p.iterations = 1;
    p.zeros = 29;
    s.phases.push_back(p);
    CHECK_THROWS_AS(run_schedule(state, s), InvalidArgument);
}

TEST_CASE("schedule files") {
    auto s = default_schedule(3, 23, parse_value_set("0,1,-1,1/2"));
    REQUIRE(s.phases.size() == 4);
    CHECK(s.phases[0].zeros == std::lround(0.29 * 207));
    auto back = parse_schedule(serialize_schedule(s));
    REQUIRE(back.phases.size() == s.phases.size());
    for (size_t i = 0; i < s.phases.size(); ++i) {
        CHECK(back.phases[i].iterations == s.phases[i].iterations);
        CHECK(back.phases[i].lambda == s.phases[i].lambda);
        CHECK(back.phases[i].zeros == s.phases[i].zeros);
        CHECK(back.phases[i].project_every == s.phases[i].project_every);
        CHECK(back.phases[i].round_attempt == s.phases[i].round_attempt);
        CHECK(back.phases[i].value_set == s.phases[i].value_set);
        CHECK(back.phases[i].tol == s.phases[i].tol);
        CHECK(back.phases[i].label == s.phases[i].label);
    }
    auto minimal = parse_schedule(R"({"phases": [{"iterations": 5, "value_set": [0, "1/2"]}]})");
    CHECK(minimal.phases[0].iterations == 5);
    CHECK(minimal.phases[0].lambda == 0.1);
    CHECK(minimal.phases[0].project_every == 10);
    CHECK(minimal.phases[0].value_set == std::vector<Rational>{Rational(0), Rational(1, 2)});
    CHECK_THROWS_AS(parse_schedule(R"({"phases": [{"iterations": -1}]})"), ParseError);
    CHECK_THROWS_AS(parse_schedule(R"({"phases": [{"lambda": -1}]})"), ParseError);
    CHECK_THROWS_AS(parse_schedule(R"({"format": "other", "phases": []})"), ParseError);
    CHECK_THROWS_AS(parse_schedule("[]"), ParseError);
}

TEST_CASE("sparsity counts small entries of the cyclic blocks") {
    auto f = CyclicFactors::zeros(2, 1, 2);
    CHECK(count_sparsity(f) == 4 * 7);
    f.A(0, 0) = 1;
    f.B(1, 1) = 5e-4;
    CHECK(count_sparsity(f) == 27);
}

TEST_CASE("perturbed z4z3 is recovered with the pinned seed") {
    auto z = builtin("z4z3");
    auto out = run_schedule(SessionState::from_cyclic(testing::perturbed_z4z3(testing::recovery_seed)),
                            testing::recovery_schedule());
    REQUIRE(out.last_round.has_value());
    CHECK(out.last_round->success);
    REQUIRE(out.last_round->decomposition.has_value());
    CHECK(decompositions_equal(*out.last_round->decomposition, z));
}
