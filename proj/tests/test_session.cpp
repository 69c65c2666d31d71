#include "mmsym/catalog.hpp"
#include "mmsym/session.hpp"
#include "mmsym/symmetry.hpp"

#include <doctest.h>
#include <httplib.h>

#include <bit>
#include <filesystem>
#include <thread>

#include <unistd.h>

using namespace mmsym;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("mmsym_session_" + name + "_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}

// Drains everything queued for a subscriber without waiting.
std::vector<std::string> drain(Session& s, Subscriber& sub) {
    std::vector<std::string> out;
    for (;;) {
        auto e = s.next_event(sub, 0);
        if (!e || e->empty()) break;
        out.push_back(*e);
    }
    return out;
}

bool same_bits(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i])) return false;
    return true;
}

struct Served {
    Session session;
    SessionServer server;
    httplib::Client client;

    explicit Served(SessionConfig cfg) : session(std::move(cfg)), server(session), client(start()) {
        client.set_read_timeout(10, 0);
    }
    std::string start() {
        REQUIRE(server.bind("127.0.0.1", 0));
        server.start();
        return "http://127.0.0.1:" + std::to_string(server.port());
    }
    httplib::Result post(const json& cmd) { return client.Post("/api/session/command", cmd.dump(), "application/json"); }
};

}  // namespace

TEST_CASE("fresh session") {
    Session s;
    auto snap = s.snapshot();
    REQUIRE(snap);
    CHECK(snap->iteration == 0);
    CHECK_FALSE(snap->busy);
    CHECK(snap->body["R"] == 7);
    CHECK(snap->body["factors"]["A"].size() == 4);
    CHECK(snap->body["history"].empty());
    CHECK(snap->body["last_round"].is_null());
}

TEST_CASE("Step advances the iteration and streams one event per iteration") {
    Session s;
    auto a = s.subscribe(), b = s.subscribe();
    auto r = s.submit({{"type", "Step"}, {"iterations", 5}});
    CHECK(r.status == 202);
    s.wait_idle();
    CHECK(s.snapshot()->iteration == 5);
    CHECK(s.snapshot()->body["history"].size() == 5);
    auto ea = drain(s, *a), eb = drain(s, *b);
    REQUIRE(ea.size() == 5);
    CHECK(ea == eb);
    for (size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea[i].rfind("id: " + std::to_string(i + 1) + "\nevent: iteration\ndata: ", 0) == 0);
        auto data = json::parse(ea[i].substr(ea[i].find("data: ") + 6));
        CHECK(data["iter"] == i + 1);
    }
    CHECK(s.submit({{"type", "Step"}, {"iterations", 5}}).status == 202);
    s.wait_idle();
    CHECK(s.snapshot()->iteration == 10);
}

TEST_CASE("Step 0 leaves the snapshot unchanged") {
    Session s;
    auto before = s.snapshot();
    CHECK(s.submit({{"type", "Step"}, {"iterations", 0}}).status == 202);
    s.wait_idle();
    auto after = s.snapshot();
    CHECK(after->iteration == before->iteration);
    CHECK(after->objective == before->objective);
    CHECK(after->body["factors"] == before->body["factors"]);
}

TEST_CASE("invalid commands are rejected with 422") {
    Session s;
    CHECK(s.submit({{"type", "Step"}, {"iterations", -1}}).status == 422);
    CHECK(s.submit({{"type", "Step"}, {"iterations", 1}, {"zeros", 29}}).status == 422);
    CHECK(s.submit({{"type", "Step"}, {"lambda", -0.5}}).status == 422);
    CHECK(s.submit({{"type", "Step"}, {"iterations", "ten"}}).status == 422);
    CHECK(s.submit({{"type", "Frobnicate"}}).status == 422);
    CHECK(s.submit(json::array()).status == 422);
    CHECK(s.submit({{"type", "RoundAttempt"}, {"tol", 0.6}}).status == 422);
    CHECK(s.submit({{"type", "Reset"}, {"n", 9}}).status == 422);
    CHECK(s.submit({{"type", "LoadFactors"}, {"file", "/nonexistent/f.json"}}).status == 422);
    CHECK(s.snapshot()->iteration == 0);
}

TEST_CASE("a running command blocks others with 409 and snapshots stay at the pre-step state") {
    SessionConfig cfg;
    cfg.n = 3;
    cfg.P = 11;
    cfg.Q = 4;
    Session s(cfg);
    CHECK(s.submit({{"type", "Step"}, {"iterations", 1000000}}).status == 202);
    auto busy = s.submit({{"type", "Step"}, {"iterations", 1}});
    CHECK(busy.status == 409);
    auto snap = s.snapshot();
    CHECK(snap->busy);
    CHECK(snap->iteration == 0);
    s.shutdown();
}

TEST_CASE("empty sessions answer 404 until created") {
    SessionConfig cfg;
    cfg.start_empty = true;
    Session s(cfg);
    CHECK(s.snapshot() == nullptr);
    CHECK(s.submit({{"type", "Step"}, {"iterations", 1}}).status == 404);
    CHECK(s.submit({{"type", "Reset"}, {"seed", 3}}).status == 202);
    s.wait_idle();
    REQUIRE(s.snapshot());
    CHECK(s.snapshot()->body["seed"] == 3);
}

TEST_CASE("Reset closes event streams") {
    Session s;
    auto sub = s.subscribe();
    CHECK(s.submit({{"type", "Reset"}, {"seed", 4}}).status == 202);
    s.wait_idle();
    auto e = s.next_event(*sub, 100);
    REQUIRE(e.has_value());
    CHECK(e->find("event: reset") == 0);
    CHECK_FALSE(s.next_event(*sub, 100).has_value());
    CHECK(s.snapshot()->generation == 1);
}

TEST_CASE("slow subscribers get a gap event") {
    SessionConfig cfg;
    cfg.subscriber_buffer = 3;
    Session s(cfg);
    auto sub = s.subscribe();
    CHECK(s.submit({{"type", "Step"}, {"iterations", 10}}).status == 202);
    s.wait_idle();
    auto events = drain(s, *sub);
    REQUIRE(!events.empty());
    CHECK(events[0].find("event: gap") == 0);
    CHECK(events.back().find("\"iter\":10") != std::string::npos);
}

TEST_CASE("Save, Reset, Load round-trips the factors bit for bit") {
    auto dir = temp_dir("save");
    Session s;
    CHECK(s.submit({{"type", "Step"}, {"iterations", 3}}).status == 202);
    s.wait_idle();
    const auto file = (dir / "f.json").string();
    CHECK(s.submit({{"type", "SaveFactors"}, {"file", file}}).status == 202);
    s.wait_idle();
    auto saved = load_factors(file);
    auto before = s.snapshot();
    CHECK(s.submit({{"type", "Reset"}, {"seed", 99}}).status == 202);
    s.wait_idle();
    CHECK(s.snapshot()->body["factors"] != before->body["factors"]);
    CHECK(s.submit({{"type", "LoadFactors"}, {"file", file}}).status == 202);
    s.wait_idle();
    CHECK(s.snapshot()->body["factors"] == before->body["factors"]);
    CHECK(s.submit({{"type", "SaveFactors"}, {"file", (dir / "g.json").string()}}).status == 202);
    s.wait_idle();
    auto again = load_factors((dir / "g.json").string());
    CHECK(same_bits(saved.A, again.A));
    CHECK(same_bits(saved.B, again.B));
    CHECK(same_bits(saved.C, again.C));
    CHECK(same_bits(saved.D, again.D));
    fs::remove_all(dir);
}

TEST_CASE("RoundAttempt writes a verified decomposition") {
    auto dir = temp_dir("round");
    const auto file = (dir / "z.json").string();
    save_factors(cyclic_from_decomposition(to_float(builtin("z4z3"))), file);
    SessionConfig cfg;
    cfg.output_dir = (dir / "out").string();
    Session s(cfg);
    CHECK(s.submit({{"type", "LoadFactors"}, {"file", file}}).status == 202);
    s.wait_idle();
    CHECK(s.submit({{"type", "RoundAttempt"}, {"value_set", {0, 1, -1}}, {"tol", 0.01}}).status == 202);
    s.wait_idle();
    auto lr = s.snapshot()->body["last_round"];
    REQUIRE(lr.is_object());
    CHECK(lr["success"] == true);
    const std::string out = lr["file"];
    REQUIRE(fs::exists(out));
    CHECK(decompositions_equal(load(out), builtin("z4z3")));

    CHECK(s.submit({{"type", "Reset"}, {"n", 3}, {"P", 11}, {"Q", 4}}).status == 202);
    s.wait_idle();
    CHECK(s.submit({{"type", "RoundAttempt"}}).status == 202);
    s.wait_idle();
    CHECK(s.snapshot()->body["last_round"]["success"] == false);
    CHECK(s.snapshot()->body["last_round"]["offending_count"].get<int>() > 0);
    fs::remove_all(dir);
}

TEST_CASE("HTTP API") {
    SessionConfig cfg;
    cfg.seed = 5;
    Served srv(cfg);
    auto& cli = srv.client;

    auto health = cli.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    auto snap = cli.Get("/api/session");
    REQUIRE(snap);
    CHECK(snap->status == 200);
    CHECK(json::parse(snap->body)["iteration"] == 0);

    auto bad = cli.Post("/api/session/command", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(json::parse(bad->body)["accepted"] == false);

    // Stream events on a second connection while stepping.
    std::vector<std::string> events;
    std::thread reader([&] {
        httplib::Client sc("127.0.0.1", srv.server.port());
        sc.set_read_timeout(10, 0);
        std::string buf;
        sc.Get("/api/session/events", [&](const char* data, size_t len) {
            buf.append(data, len);
            size_t pos;
            while ((pos = buf.find("\n\n")) != std::string::npos) {
                std::string ev = buf.substr(0, pos);
                buf.erase(0, pos + 2);
                if (ev.rfind("id: ", 0) == 0) events.push_back(ev);
            }
            return events.size() < 10;
        });
    });
    // Wait until the stream is connected before stepping.
    for (int i = 0; i < 200; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        auto h = cli.Get("/api/health");
        if (h && json::parse(h->body)["subscribers"].get<int>() > 0) break;
    }

    auto step = srv.post({{"type", "Step"}, {"iterations", 10}});
    REQUIRE(step);
    CHECK(step->status == 202);
    CHECK(json::parse(step->body)["accepted"] == true);
    reader.join();
    REQUIRE(events.size() == 10);
    for (size_t i = 0; i < events.size(); ++i) CHECK(events[i].rfind("id: " + std::to_string(i + 1) + "\n", 0) == 0);

    srv.session.wait_idle();
    auto after = json::parse(cli.Get("/api/session")->body);
    CHECK(after["iteration"] == 10);

    auto unknown = srv.post({{"type", "Step"}, {"zeros", 1000}});
    REQUIRE(unknown);
    CHECK(unknown->status == 422);

    auto opts = cli.Options("/api/session/command");
    REQUIRE(opts);
    CHECK(opts->status == 204);
    srv.server.stop();
}

TEST_CASE("HTTP 404 without a session") {
    SessionConfig cfg;
    cfg.start_empty = true;
    Served srv(cfg);
    auto r = srv.client.Get("/api/session");
    REQUIRE(r);
    CHECK(r->status == 404);
    auto c = srv.post({{"type", "Step"}, {"iterations", 1}});
    REQUIRE(c);
    CHECK(c->status == 404);
    srv.server.stop();
}

TEST_CASE("binding an occupied port fails") {
    Session s;
    SessionServer a(s), b(s);
    REQUIRE(a.bind("127.0.0.1", 0));
    CHECK_FALSE(b.bind("127.0.0.1", a.port()));
}

TEST_CASE("transport rounding keeps six significant digits") {
    CHECK(transport_round(0.123456789) == 0.123457);
    CHECK(transport_round(-1234567.0) == -1234570.0);
    CHECK(transport_round(0.0) == 0.0);
}
