#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "telearm/mat.hpp"

namespace telearm::qp {

/// minimize ½xᵀHx + fᵀx subject to W·x ⪯ w, with H symmetric positive definite.
struct QPProblem {
    Mat H;
    Vec f;
    Mat W;  // m x n, may have zero rows
    Vec w;

    std::size_t num_variables() const noexcept { return f.size(); }
    std::size_t num_constraints() const noexcept { return w.size(); }
    double objective(std::span<const double> x) const;
};

enum class QPStatus { Optimal, Infeasible };

struct QPSolution {
    QPStatus status = QPStatus::Optimal;
    Vec x;
    /// One multiplier per constraint row, zero for inactive rows. At the
    /// optimum H·x + f + Wᵀ·multipliers = 0.
    Vec multipliers;
    std::vector<std::size_t> active_set;
    int iterations = 0;

    bool optimal() const noexcept { return status == QPStatus::Optimal; }
};

/// Malformed problem, non positive definite H or iteration cap exceeded.
class QpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolverOptions {
    int max_iterations = 200;
    /// A constraint counts as violated when W_j·x − w_j exceeds this (scaled by max(1, |w_j|)).
    double feasibility_tolerance = 1e-12;
};

/// Dual active-set solver. Starts from the unconstrained minimizer (or from a
/// warm-start active set) and adds violated constraints one at a time while
/// keeping the multipliers non-negative. Holds scratch state between calls, so
/// use one instance per thread.
class Solver {
public:
    Solver() = default;
    explicit Solver(SolverOptions options) : options_(options) {}

    /// Infeasible problems come back with status Infeasible; structural
    /// problems throw QpError.
    QPSolution solve(const QPProblem& problem, std::span<const std::size_t> warm_start = {});

    /// Reuses the active set of the previous solve as the warm start.
    QPSolution solve_warm(const QPProblem& problem);

    const SolverOptions& options() const noexcept { return options_; }
    void reset_warm_start() { last_active_.clear(); }

private:
    SolverOptions options_;
    std::vector<std::size_t> last_active_;
};

/// Cold-start convenience wrapper.
QPSolution solve(const QPProblem& problem);

}  // namespace telearm::qp
