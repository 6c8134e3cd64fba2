#pragma once

#include "gridmit/grid.hpp"

namespace gridmit {

/// Strictly convex quadratic program
///   min 1/2 x' diag(q) x + c' x
///   s.t. A x = b,  G x <= h
/// with q > 0 elementwise.
struct QpProblem {
    Vec q;  // diagonal of the Hessian
    Vec c;
    Mat A;
    Vec b;
    Mat G;
    Vec h;

    int var_count() const { return static_cast<int>(q.size()); }
};

enum class QpStatus { Optimal, Infeasible, Stalled };

struct QpResult {
    QpStatus status = QpStatus::Stalled;
    Vec x;
    /// Multipliers in the convention  diag(q) x + c + A' y + G' z = 0,  z >= 0.
    Vec eq_dual;
    Vec ineq_dual;
    double objective = 0.0;
    /// Total constraint violation from the phase-one certificate; filled only
    /// when status == Infeasible and certification was requested.
    double infeasibility = 0.0;
    int iterations = 0;
};

struct QpOptions {
    int max_iterations = 100000;
    double tol = 1e-9;         // constraint violation threshold
    double pivot_tol = 1e-8;   // dependence / dual step threshold
    bool certify_infeasibility = true;
};

struct SolverStall : GridError {
    using GridError::GridError;
};

/// Dual active-set solve. Finite termination; throws SolverStall only when
/// the iteration budget is exhausted.
QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// Minimum total constraint violation of the problem's constraint system
/// (objective ignored). Zero within tolerance iff the constraints are
/// feasible. Independent of the active-set solve path.
double min_violation(const QpProblem& problem, Vec* x_out = nullptr);

}  // namespace gridmit
