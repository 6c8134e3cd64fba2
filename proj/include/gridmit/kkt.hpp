#pragma once

#include "gridmit/control.hpp"

namespace gridmit {

struct KktReport {
    double stationarity = 0.0;      // max |gradient of Lagrangian| over variables
    double primal_feasibility = 0.0;  // max constraint violation
    double dual_feasibility = 0.0;    // max negative part of inequality duals
    double complementarity = 0.0;     // max |dual * slack|

    bool passes(double tol = 1e-6) const {
        return stationarity <= tol && primal_feasibility <= tol &&
               dual_feasibility <= tol && complementarity <= tol;
    }
};

/// Verifies an Optimal ControlSolution against its ControlProblem. Assembles
/// the optimality system directly from the problem data, using a dense
/// pseudo-inverse for the flow sensitivities rather than the solver's
/// per-island reduced solves.
KktReport check_kkt(const ControlProblem& problem, const ControlSolution& solution);

}  // namespace gridmit
