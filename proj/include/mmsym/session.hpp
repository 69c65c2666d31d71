#pragma once

#include "mmsym/search.hpp"

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace mmsym {

// Entries are rounded to 6 significant digits in snapshots.
double transport_round(double v);

struct SessionConfig {
    int n = 2, P = 1, Q = 2;
    std::uint64_t seed = 0;
    bool start_empty = false;       // no session until Reset or LoadFactors
    std::string output_dir = ".";   // where successful round attempts are written
    size_t subscriber_buffer = 1024;
    size_t history_window = 512;    // history points included in a snapshot
};

struct Snapshot {
    std::uint64_t generation = 0;   // bumped by Reset and LoadFactors
    long long iteration = 0;
    double objective = 0;
    int sparsity = 0;
    bool busy = false;
    nlohmann::json body;            // the GET /api/session payload
};

// One server-sent event already formatted as "event: ...\ndata: ...\n\n".
struct Subscriber {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> queue;
    size_t capacity = 1024;
    long long dropped = 0;
    bool closed = false;
    std::uint64_t generation = 0;
};

struct SubmitResult {
    int status = 202;  // 202 accepted, 404 no session, 409 busy, 422 invalid
    std::string reason;
    std::uint64_t command_id = 0;
};

// A single steerable search session with one worker thread. Commands are
// accepted one at a time; snapshots are immutable and swapped atomically.
class Session {
public:
    explicit Session(SessionConfig config = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    // nullptr when no session exists yet.
    std::shared_ptr<const Snapshot> snapshot() const;
    SubmitResult submit(const nlohmann::json& command);
    // Blocks until no command is running.
    void wait_idle();

    std::shared_ptr<Subscriber> subscribe();
    void unsubscribe(const std::shared_ptr<Subscriber>& s);
    size_t subscriber_count();
    // Formats and pops the next chunk for a subscriber; waits up to `timeout_ms`.
    // Returns "" on timeout and nullopt once the stream is closed.
    std::optional<std::string> next_event(Subscriber& s, int timeout_ms);

    // Ends every open event stream.
    void close_streams();
    // Closes every stream and stops the worker.
    void shutdown();

private:
    struct Command;
    void worker_loop(std::stop_token stop);
    void execute(Command& cmd, std::stop_token stop);
    void publish(bool busy);
    void broadcast(const std::string& chunk);

    SessionConfig config_;
    std::optional<SessionState> state_;  // owned by the worker while busy
    std::optional<RoundResult> last_round_;
    std::string last_round_file_;
    std::string last_error_;
    std::uint64_t generation_ = 0;
    std::uint64_t next_command_ = 1;
    int round_counter_ = 0;

    std::shared_ptr<const Snapshot> snap_;  // accessed with std::atomic_load/store

    std::mutex mu_;  // guards pending_, busy_, subscribers_
    std::condition_variable cv_;
    std::unique_ptr<Command> pending_;
    bool busy_ = false;
    std::vector<std::shared_ptr<Subscriber>> subscribers_;
    std::jthread worker_;
};

// HTTP front end: GET /api/health, GET /api/session, POST /api/session/command,
// GET /api/session/events.
class SessionServer {
public:
    explicit SessionServer(Session& session);
    ~SessionServer();

    // Returns false if the address cannot be bound. Port 0 picks a free port.
    bool bind(const std::string& host, int port);
    int port() const { return port_; }
    void listen();  // blocks until stop()
    void start();   // listen() on a background thread
    void stop();

private:
    Session& session_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace mmsym
