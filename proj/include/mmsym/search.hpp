#pragma once

#include "mmsym/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

namespace mmsym {

using Matrix = Eigen::MatrixXd;

// Columns x_r, y_r, z_r of m x R matrices, m = n^2.
struct FactorMatrices {
    int n = 0;
    Matrix X, Y, Z;

    int m() const { return n * n; }
    int rank() const { return static_cast<int>(X.cols()); }
};

// Cyclic-invariant layout with P + 3Q = R:
// X = (A B C D), Y = (A D B C), Z = (A C D B).
struct CyclicFactors {
    int n = 0, P = 0, Q = 0;
    Matrix A, B, C, D;

    int m() const { return n * n; }
    int rank() const { return P + 3 * Q; }
    static CyclicFactors zeros(int n, int P, int Q);
};

enum class Slot { X = 0, Y = 1, Z = 2 };

void check_finite(const Matrix& a, const char* what);

FactorMatrices assemble(const CyclicFactors& f);
// Averages the three copies of every block. Throws InvalidArgument on a layout mismatch.
CyclicFactors cyclic_project(const FactorMatrices& f, int P, int Q);

FactorMatrices from_decomposition(const FloatDecomposition& dec);
// Cubes become A columns; the remaining terms must group into Z3 orbits.
CyclicFactors cyclic_from_decomposition(const FloatDecomposition& dec);
FloatDecomposition to_decomposition(const FactorMatrices& f);

Tensor3<double> reconstruct(const FactorMatrices& f);
double objective_full(const FactorMatrices& f);
double objective_full(const FactorMatrices& f, const Tensor3<double>& target);
double objective_cyclic(const CyclicFactors& f);
// Gradient of objective_cyclic^2 with respect to A, B, C, D.
CyclicFactors gradient_cyclic(const CyclicFactors& f);

// ---- phase 1 ---------------------------------------------------------------

struct Phase1Options {
    int max_iterations = 400;
    double max_abs = 1.0;
    double target = 1e-12;  // stop once the objective is below this
};

struct Phase1Result {
    CyclicFactors factors;
    double objective = 0;
    int iterations = 0;
    std::vector<double> trace;  // best-so-far objective after every iteration
};

// Box-constrained Levenberg-Marquardt on objective_cyclic^2 from a uniform
// [-max_abs, max_abs] start. Only improving steps are accepted, so the trace is
// non-increasing and the result is the best iterate.
Phase1Result phase1_optimize(int n, int R, int P, int Q, std::uint64_t seed, const Phase1Options& opts = {},
                             std::stop_token stop = {});

// ---- phase 2 ---------------------------------------------------------------

// Caps |e| > max_abs to sign(e) * max_abs, then zeroes the `zeros` smallest
// magnitudes (ties by row, then column).
Matrix build_targets(const Matrix& x, int zeros, double max_abs = 1.0);

// Minimizer of ||T_(slot) - F K^T||^2 + lambda ||F - target||^2 over the factor in
// `slot`, K the Khatri-Rao product of the other two. Throws SingularError when
// the normal equations are singular (lambda = 0).
Matrix als_update(const FactorMatrices& f, Slot slot, double lambda, const Matrix& target);
Matrix als_update(const Tensor3<double>& t, const FactorMatrices& f, Slot slot, double lambda, const Matrix& target);

struct RoundIssue {
    char block = 'A';
    int row = 0, col = 0;
    double value = 0;
};

struct RoundResult {
    bool success = false;
    std::optional<ExactDecomposition> decomposition;
    std::vector<RoundIssue> offending;
    int dropped_terms = 0;
    Rational residual_norm_sq = 0;
    std::string message;
};

std::vector<Rational> default_value_set();
std::vector<Rational> parse_value_set(const std::string& csv);
// Throws InvalidArgument unless 0 < tol < half the smallest gap of `values`.
void check_round_tolerance(const std::vector<Rational>& values, double tol);

// Rounds every entry to the nearest member of `values` within `tol` and verifies
// the result exactly. Terms with a zero factor after rounding are dropped.
RoundResult round_decomposition(const CyclicFactors& f, const std::vector<Rational>& values, double tol = 1e-2,
                                bool allow_nonzero = false);

// ---- schedules -------------------------------------------------------------

struct SchedulePhase {
    int iterations = 0;
    double lambda = 0.1;
    int zeros = 0;
    int project_every = 10;  // 0 disables projection
    bool round_attempt = false;
    std::vector<Rational> value_set = default_value_set();
    double tol = 1e-2;
    std::string label;
};

struct Schedule {
    std::vector<SchedulePhase> phases;
};

Schedule parse_schedule(const std::string& text);
std::string serialize_schedule(const Schedule& s);
Schedule load_schedule(const std::string& path);
// Zero ramp that rounds after each stage; used by `search` without --schedule.
Schedule default_schedule(int n, int R, const std::vector<Rational>& values);

struct HistoryPoint {
    long long iteration = 0;
    double objective = 0;
    int sparsity = 0;
};

struct SessionState {
    int n = 0, R = 0, P = 0, Q = 0;
    FactorMatrices working;  // ALS iterate; projected to the cyclic layout at projection steps
    double objective = 0;
    int sparsity = 0;
    long long iteration = 0;
    std::vector<HistoryPoint> history;
    size_t history_capacity = 4096;
    std::uint64_t seed = 0;

    CyclicFactors cyclic() const { return cyclic_project(working, P, Q); }
    static SessionState from_cyclic(const CyclicFactors& f, std::uint64_t seed = 0);
    static SessionState random(int n, int P, int Q, std::uint64_t seed);
    void refresh();  // recompute objective and sparsity
};

constexpr double sparsity_threshold = 1e-3;
int count_sparsity(const CyclicFactors& f, double threshold = sparsity_threshold);

struct ScheduleEvent {
    enum class Kind { iteration, project, round, phase_end } kind = Kind::iteration;
    long long iteration = 0;
    double objective = 0;
    int sparsity = 0;
    int phase = 0;
    std::optional<RoundResult> round;
};

std::string event_record(const ScheduleEvent& e);

using EventSink = std::function<void(const ScheduleEvent&)>;

// Runs the phases in order. Cancellation is checked between iterations; a
// cancelled run returns the state reached so far.
struct ScheduleOutcome {
    SessionState state;
    std::vector<ScheduleEvent> log;
    std::optional<RoundResult> last_round;
    bool cancelled = false;
};

ScheduleOutcome run_schedule(SessionState state, const Schedule& schedule, const EventSink& sink = {},
                             std::stop_token stop = {});

// ---- batch search ------------------------------------------------------------

struct RestartReport {
    std::uint64_t seed = 0;
    double phase1_objective = 0;
    bool phase1_converged = false;
    double final_objective = 0;
    bool exact = false;
    std::optional<ExactDecomposition> decomposition;
};

struct SearchOptions {
    int n = 2, R = 7, P = 1, Q = 2;
    int restarts = 1;
    std::uint64_t seed = 0;
    int jobs = 1;
    double converge = 1e-6;  // phase 1 objective needed to continue with the schedule
    Phase1Options phase1;
    Schedule schedule;
    bool stop_at_first = true;
};

struct SearchReport {
    std::vector<RestartReport> restarts;  // in seed order
    std::optional<size_t> best;           // index into restarts
};

RestartReport run_restart(const SearchOptions& opts, std::uint64_t seed, std::stop_token stop = {});
SearchReport search(const SearchOptions& opts, std::stop_token stop = {});

// ---- factor files --------------------------------------------------------------

// "mmsym-factors" JSON: n, P, Q and the blocks A..D as rows of hex-encoded
// doubles; reading restores the bits exactly.
std::string serialize_factors(const CyclicFactors& f);
CyclicFactors parse_factors(const std::string& text);
void save_factors(const CyclicFactors& f, const std::string& path);
CyclicFactors load_factors(const std::string& path);

}  // namespace mmsym
