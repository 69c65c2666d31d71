#include "mmsym/session.hpp"

#include "mmsym/catalog.hpp"
#include "mmsym/kernels.hpp"

#include <httplib.h>

#include <sys/socket.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

namespace mmsym {

using nlohmann::json;

double transport_round(double v) {
    if (v == 0 || !std::isfinite(v)) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

namespace {

enum class CommandType { step, project, round_attempt, reset, load, save };

const char* type_name(CommandType t) {
    switch (t) {
        case CommandType::step: return "Step";
        case CommandType::project: return "Project";
        case CommandType::round_attempt: return "RoundAttempt";
        case CommandType::reset: return "Reset";
        case CommandType::load: return "LoadFactors";
        default: return "SaveFactors";
    }
}

json block_rows(const Matrix& b) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < b.cols(); ++j) row.push_back(transport_round(b(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sse(const char* event, const json& data, std::optional<long long> id = {}) {
    std::string out;
    if (id) out += "id: " + std::to_string(*id) + "\n";
    out += std::string("event: ") + event + "\ndata: " + data.dump() + "\n\n";
    return out;
}

std::vector<Rational> value_set_from(const json& v) {
    if (!v.is_array() || v.empty()) throw InvalidArgument("value_set must be a non-empty array");
    std::vector<Rational> out;
    for (const auto& e : v) {
        if (e.is_number_integer())
            out.emplace_back(e.get<long>());
        else if (e.is_string())
            out.push_back(parse_rational(e.get<std::string>()));
        else
            throw InvalidArgument("value_set entries must be integers or \"p/q\" strings");
    }
    return out;
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(std::string(key) + " has the wrong type");
    }
}

}  // namespace

struct Session::Command {
    CommandType type{};
    std::uint64_t id = 0;
    SchedulePhase phase;  // Step, and value_set/tol for RoundAttempt
    std::uint64_t seed = 0;
    int n = 0, P = 0, Q = 0;
    std::optional<CyclicFactors> factors;  // LoadFactors, parsed at submit time
    std::string file;
};

Session::Session(SessionConfig config) : config_(std::move(config)) {
    if (!config_.start_empty) {
        if (config_.P < 0 || config_.Q < 0 || config_.P + 3 * config_.Q < 1 || config_.n < 1)
            throw InvalidArgument("session: invalid n, P or Q");
        state_ = SessionState::random(config_.n, config_.P, config_.Q, config_.seed);
    }
    publish(false);
    worker_ = std::jthread([this](std::stop_token st) { worker_loop(st); });
}

Session::~Session() { shutdown(); }

void Session::shutdown() {
    worker_.request_stop();
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    close_streams();
}

std::shared_ptr<const Snapshot> Session::snapshot() const {
    auto s = std::atomic_load(&snap_);
    if (!s || !s->body.value("session", false)) return nullptr;
    return s;
}

void Session::publish(bool busy) {
    auto snap = std::make_shared<Snapshot>();
    snap->generation = generation_;
    snap->busy = busy;
    json& b = snap->body;
    b["session"] = state_.has_value();
    b["busy"] = busy;
    b["generation"] = generation_;
    b["last_error"] = last_error_;
    if (state_) {
        const SessionState& s = *state_;
        snap->iteration = s.iteration;
        snap->objective = s.objective;
        snap->sparsity = s.sparsity;
        b["iteration"] = s.iteration;
        b["objective"] = s.objective;
        b["sparsity"] = s.sparsity;
        b["n"] = s.n;
        b["P"] = s.P;
        b["Q"] = s.Q;
        b["R"] = s.R;
        b["seed"] = s.seed;
        CyclicFactors f = s.cyclic();
        b["factors"] = {{"A", block_rows(f.A)}, {"B", block_rows(f.B)}, {"C", block_rows(f.C)}, {"D", block_rows(f.D)}};
        json hist = json::array();
        size_t start = s.history.size() > config_.history_window ? s.history.size() - config_.history_window : 0;
        for (size_t i = start; i < s.history.size(); ++i)
            hist.push_back({s.history[i].iteration, s.history[i].objective, s.history[i].sparsity});
        b["history"] = std::move(hist);
    }
    if (last_round_) {
        json off = json::array();
        for (size_t i = 0; i < last_round_->offending.size() && i < 32; ++i) {
            const auto& o = last_round_->offending[i];
            off.push_back({{"block", std::string(1, o.block)}, {"row", o.row}, {"col", o.col}, {"value", o.value}});
        }
        b["last_round"] = {{"success", last_round_->success},
                           {"message", last_round_->message},
                           {"file", last_round_file_},
                           {"dropped_terms", last_round_->dropped_terms},
                           {"offending_count", last_round_->offending.size()},
                           {"offending", std::move(off)}};
    } else {
        b["last_round"] = nullptr;
    }
    std::atomic_store(&snap_, std::shared_ptr<const Snapshot>(std::move(snap)));
}

SubmitResult Session::submit(const json& body) {
    SubmitResult res;
    auto cmd = std::make_unique<Command>();
    std::lock_guard lock(mu_);
    if (busy_) return {409, "a command is already running", 0};
    try {
        if (!body.is_object()) throw InvalidArgument("command must be an object");
        const std::string type = get_or<std::string>(body, "type", "");
        if (type == "Step")
            cmd->type = CommandType::step;
        else if (type == "Project")
            cmd->type = CommandType::project;
        else if (type == "RoundAttempt")
            cmd->type = CommandType::round_attempt;
        else if (type == "Reset")
            cmd->type = CommandType::reset;
        else if (type == "LoadFactors")
            cmd->type = CommandType::load;
        else if (type == "SaveFactors")
            cmd->type = CommandType::save;
        else
            throw InvalidArgument("unknown command type '" + type + "'");

        const bool creates = cmd->type == CommandType::reset || cmd->type == CommandType::load;
        if (!state_ && !creates) return {404, "no session", 0};

        switch (cmd->type) {
            case CommandType::step: {
                auto& p = cmd->phase;
                p.iterations = get_or(body, "iterations", 0);
                p.lambda = get_or(body, "lambda", 0.1);
                p.zeros = get_or(body, "zeros", 0);
                p.project_every = get_or(body, "project_every", 10);
                if (p.iterations < 0 || p.iterations > 1000000) throw InvalidArgument("iterations must be in [0, 1e6]");
                if (!(p.lambda >= 0) || !std::isfinite(p.lambda)) throw InvalidArgument("lambda must be >= 0");
                if (p.zeros < 0 || p.zeros > state_->working.m() * state_->R)
                    throw InvalidArgument("zeros must be in [0, " + std::to_string(state_->working.m() * state_->R) + "]");
                if (p.project_every < 0) throw InvalidArgument("project_every must be >= 0");
                break;
            }
            case CommandType::round_attempt: {
                auto& p = cmd->phase;
                if (body.contains("value_set")) p.value_set = value_set_from(body["value_set"]);
                p.tol = get_or(body, "tol", 1e-2);
                check_round_tolerance(p.value_set, p.tol);
                break;
            }
            case CommandType::reset: {
                cmd->seed = get_or<std::uint64_t>(body, "seed", config_.seed);
                cmd->n = get_or(body, "n", state_ ? state_->n : config_.n);
                cmd->P = get_or(body, "P", state_ ? state_->P : config_.P);
                cmd->Q = get_or(body, "Q", state_ ? state_->Q : config_.Q);
                if (cmd->n < 1 || cmd->n > 6) throw InvalidArgument("n must be in [1, 6]");
                if (cmd->P < 0 || cmd->Q < 0 || cmd->P + 3 * cmd->Q < 1) throw InvalidArgument("invalid P, Q");
                break;
            }
            case CommandType::load:
            case CommandType::save: {
                cmd->file = get_or<std::string>(body, "file", "");
                if (cmd->file.empty()) throw InvalidArgument("file is required");
                if (cmd->type == CommandType::load) {
                    cmd->factors = load_factors(cmd->file);
                    check_finite(cmd->factors->A, "A");
                }
                break;
            }
            case CommandType::project: break;
        }
    } catch (const std::exception& e) {
        return {422, e.what(), 0};
    }
    cmd->id = next_command_++;
    res.command_id = cmd->id;
    busy_ = true;
    publish(true);
    pending_ = std::move(cmd);
    cv_.notify_all();
    return res;
}

void Session::wait_idle() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !busy_; });
}

void Session::worker_loop(std::stop_token stop) {
    while (!stop.stop_requested()) {
        std::unique_ptr<Command> cmd;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return pending_ || stop.stop_requested(); });
            if (!pending_) break;
            cmd = std::move(pending_);
        }
        last_error_.clear();
        try {
            execute(*cmd, stop);
        } catch (const std::exception& e) {
            last_error_ = std::string(type_name(cmd->type)) + ": " + e.what();
        }
        std::lock_guard lock(mu_);
        publish(false);
        busy_ = false;
        cv_.notify_all();
    }
    std::lock_guard lock(mu_);
    busy_ = false;
    cv_.notify_all();
}

void Session::execute(Command& cmd, std::stop_token stop) {
    switch (cmd.type) {
        case CommandType::step: {
            Schedule sched;
            sched.phases.push_back(cmd.phase);
            auto sink = [&](const ScheduleEvent& ev) {
                if (ev.kind != ScheduleEvent::Kind::iteration) return;
                broadcast(sse("iteration",
                              {{"iter", ev.iteration}, {"objective", ev.objective}, {"sparsity", ev.sparsity}},
                              ev.iteration));
            };
            ScheduleOutcome out = run_schedule(*state_, sched, sink, stop);
            state_ = std::move(out.state);
            break;
        }
        case CommandType::project:
            state_->working = assemble(state_->cyclic());
            state_->refresh();
            break;
        case CommandType::round_attempt: {
            RoundResult r = round_decomposition(state_->cyclic(), cmd.phase.value_set, cmd.phase.tol);
            last_round_file_.clear();
            if (r.success && r.decomposition) {
                namespace fs = std::filesystem;
                fs::create_directories(config_.output_dir);
                fs::path path = fs::path(config_.output_dir) /
                                ("round-" + std::to_string(generation_) + "-" + std::to_string(state_->iteration) + "-" +
                                 std::to_string(++round_counter_) + ".json");
                r.decomposition->note = "rounded at iteration " + std::to_string(state_->iteration);
                save(*r.decomposition, path.string());
                last_round_file_ = path.string();
            }
            last_round_ = std::move(r);
            break;
        }
        case CommandType::reset:
            state_ = SessionState::random(cmd.n, cmd.P, cmd.Q, cmd.seed);
            ++generation_;
            last_round_.reset();
            last_round_file_.clear();
            broadcast(sse("reset", {{"generation", generation_}, {"seed", cmd.seed}}));
            close_streams();
            break;
        case CommandType::load:
            state_ = SessionState::from_cyclic(*cmd.factors, state_ ? state_->seed : config_.seed);
            ++generation_;
            last_round_.reset();
            last_round_file_.clear();
            broadcast(sse("reset", {{"generation", generation_}, {"file", cmd.file}}));
            close_streams();
            break;
        case CommandType::save:
            save_factors(state_->cyclic(), cmd.file);
            break;
    }
}

std::shared_ptr<Subscriber> Session::subscribe() {
    auto s = std::make_shared<Subscriber>();
    s->capacity = config_.subscriber_buffer;
    std::lock_guard lock(mu_);
    s->generation = generation_;
    subscribers_.push_back(s);
    return s;
}

void Session::unsubscribe(const std::shared_ptr<Subscriber>& s) {
    std::lock_guard lock(mu_);
    std::erase(subscribers_, s);
}

size_t Session::subscriber_count() {
    std::lock_guard lock(mu_);
    return subscribers_.size();
}

void Session::broadcast(const std::string& chunk) {
    std::lock_guard lock(mu_);
    for (auto& s : subscribers_) {
        {
            std::lock_guard sl(s->mu);
            if (s->queue.size() >= s->capacity) {
                s->dropped += static_cast<long long>(s->queue.size());
                s->queue.clear();
            }
            s->queue.push_back(chunk);
        }
        s->cv.notify_all();
    }
}

void Session::close_streams() {
    std::vector<std::shared_ptr<Subscriber>> subs;
    {
        std::lock_guard lock(mu_);
        subs.swap(subscribers_);
    }
    for (auto& s : subs) {
        {
            std::lock_guard sl(s->mu);
            s->closed = true;
        }
        s->cv.notify_all();
    }
}

std::optional<std::string> Session::next_event(Subscriber& s, int timeout_ms) {
    std::unique_lock lock(s.mu);
    s.cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                  [&] { return s.closed || s.dropped > 0 || !s.queue.empty(); });
    if (s.dropped > 0) {
        long long d = s.dropped;
        s.dropped = 0;
        return sse("gap", {{"dropped", d}});
    }
    if (!s.queue.empty()) {
        std::string out = std::move(s.queue.front());
        s.queue.pop_front();
        return out;
    }
    if (s.closed) return std::nullopt;
    return std::string();
}

// ---- HTTP ------------------------------------------------------------------

SessionServer::SessionServer(Session& session) : session_(session), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    // Plain SO_REUSEADDR so a second server cannot share an occupied port.
    srv.set_socket_options([](int sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    auto reply = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };

    srv.Get("/api/health", [this, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, 200,
              {{"status", "ok"},
               {"session", session_.snapshot() != nullptr},
               {"subscribers", session_.subscriber_count()},
               {"kernels", kernels::isa_name(kernels::active_isa())}});
    });

    srv.Get("/api/session", [this, reply](const httplib::Request&, httplib::Response& res) {
        auto snap = session_.snapshot();
        if (!snap) return reply(res, 404, {{"error", "no session"}});
        reply(res, 200, snap->body);
    });

    srv.Options("/api/session/command", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    srv.Post("/api/session/command", [this, reply](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::parse_error& e) {
            return reply(res, 422, {{"accepted", false}, {"reason", std::string("malformed body: ") + e.what()}});
        }
        SubmitResult r = session_.submit(body);
        if (r.status == 202) return reply(res, 202, {{"accepted", true}, {"id", r.command_id}});
        reply(res, r.status, {{"accepted", false}, {"reason", r.reason}});
    });

    srv.Get("/api/session/events", [this, reply](const httplib::Request&, httplib::Response& res) {
        auto snap = session_.snapshot();
        if (!snap) return reply(res, 404, {{"error", "no session"}});
        auto sub = session_.subscribe();
        long long start = snap->iteration;
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, sub, start, first = true](size_t, httplib::DataSink& sink) mutable {
                if (first) {
                    // Comment line: new subscribers only see iterations after `start`.
                    std::string hello = ": connected at iteration " + std::to_string(start) + "\n\n";
                    if (!sink.write(hello.data(), hello.size())) return false;
                    first = false;
                }
                int idle = 0;
                while (sink.is_writable()) {
                    auto chunk = session_.next_event(*sub, 250);
                    if (!chunk) {
                        sink.done();
                        return true;
                    }
                    if (chunk->empty()) {
                        if (++idle < 60) continue;
                        idle = 0;
                        *chunk = ": keepalive\n\n";
                    }
                    if (!sink.write(chunk->data(), chunk->size())) return false;
                }
                return false;
            },
            [this, sub](bool) { session_.unsubscribe(sub); });
    });
}

SessionServer::~SessionServer() { stop(); }

bool SessionServer::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        return port_ > 0;
    }
    if (!server_->bind_to_port(host, port)) return false;
    port_ = port;
    return true;
}

void SessionServer::listen() { server_->listen_after_bind(); }

void SessionServer::start() {
    thread_ = std::thread([this] { listen(); });
    server_->wait_until_ready();
}

void SessionServer::stop() {
    if (!server_) return;
    if (server_->is_running()) {
        session_.close_streams();
        server_->stop();
    }
    if (thread_.joinable()) thread_.join();
}

}  // namespace mmsym
