#pragma once

#include "gridmit/control.hpp"
#include "gridmit/grid.hpp"

#include <memory>
#include <string>

namespace gridmit {

struct NumericalBlowup : GridError {
    using GridError::GridError;
};

struct TrajectoryEvent {
    double t = 0.0;
    std::string kind;
    std::string detail;
};

struct Trajectory {
    std::vector<double> times;
    Mat omega;  // samples x buses
    Mat flows;  // samples x surviving lines
    Mat duals;  // samples x monitored duals
    std::vector<std::string> dual_names;
    std::vector<TrajectoryEvent> events;
    Vec final_control;  // d at the end of the horizon

    double max_abs_dual() const;
};

/// Feedback controller supplying d(t) and integrating its own state.
class DynController {
public:
    virtual ~DynController() = default;
    virtual int state_dim() const { return 0; }
    virtual Vec initial_state() const { return Vec(); }
    virtual Vec control(const Vec& omega, const Vec& flows, const Vec& state) const = 0;
    virtual Vec state_derivative(const Vec& omega, const Vec& flows,
                                 const Vec& state) const {
        return Vec::Zero(state_dim());
    }
    virtual void project(Vec& state) const { (void)state; }
    virtual Vec duals(const Vec& state) const { return Vec(); }
    virtual std::vector<std::string> dual_names() const { return {}; }
};

class ZeroController : public DynController {
public:
    explicit ZeroController(int bus_count) : n_(bus_count) {}
    Vec control(const Vec&, const Vec&, const Vec&) const override;

private:
    int n_;
};

/// d_j = alpha_j * omega_j, clamped to the supplied bounds.
class DroopController : public DynController {
public:
    DroopController(const GridCase& grid, double bound = 1e9);
    Vec control(const Vec& omega, const Vec&, const Vec&) const override;

private:
    Vec gain_;
    double bound_;
};

struct UcGains {
    double k_nu = 1.0;
    double k_theta = 1.0;
    double k_lambda = 1.0;
    double k_mu = 1.0;
    double augmentation = 1.0;
};

/// Primal-dual gradient flow of the control problem, run in controller state
/// space; d(t) is the per-bus Lagrangian minimizer driven by the internal
/// balance dual. Line-limit duals exist only for the UC variant.
class UcController : public DynController {
public:
    UcController(const ControlProblem& problem, const UcGains& gains = {});
    int state_dim() const override;
    Vec initial_state() const override;
    Vec control(const Vec& omega, const Vec& flows, const Vec& state) const override;
    Vec state_derivative(const Vec& omega, const Vec& flows,
                         const Vec& state) const override;
    void project(Vec& state) const override;
    Vec duals(const Vec& state) const override;
    std::vector<std::string> dual_names() const override;

private:
    Vec control_from_nu(const Vec& nu) const;

    const ControlProblem problem_;
    UcGains gains_;
    int n_, m_;
    std::vector<int> active_areas_;
    // Per-bus combined box bounds and gains for the two control components.
    Vec dg_lo_, dg_hi_, dl_lo_, dl_hi_;  // per bus; zero-width where absent
    Vec alpha_gen_, alpha_load_;
};

struct SimulateOptions {
    double dt = 1e-3;
    double horizon = 60.0;
    double output_interval = 1e-2;
    double blowup_bound = 1e6;
    double dual_threshold = 0.0;  // >0: record a "severe" event at first crossing
};

/// Fixed-step 4th-order integration of the swing/flow dynamics with the
/// controller in the loop. omega(0) = 0, flows(0) = f0_surviving.
Trajectory simulate(const GridCase& grid, const Topology& surviving, const Vec& p0,
                    const Vec& f0_surviving, DynController& controller,
                    const SimulateOptions& options = {});

/// Closed-form droop equilibrium per island.
struct DroopEquilibrium {
    Vec d;        // alpha-share of the island imbalance
    Vec omega;    // frequency deviation
    Vec flows;    // DC flows at the post-contingency injections
};
DroopEquilibrium droop_equilibrium(const GridCase& grid, const Topology& topology,
                                   const Vec& p0);

struct Detection {
    bool severe = false;
    double warning_time = -1.0;
    double max_dual_seen = 0.0;
};

/// Runs the primal-dual controller and reports the first threshold crossing
/// of any monitored dual.
Detection detect_severe(const ControlProblem& problem, const Vec& f0_surviving,
                        double threshold = 0.5, double t_max = 60.0,
                        const SimulateOptions& options = {}, const UcGains& gains = {});

/// CSV export: t, per-bus omega, per-line f, per-dual values, event flag.
void write_trajectory_csv(const Trajectory& trajectory, const GridCase& grid,
                          const Topology& surviving, const std::string& path);

}  // namespace gridmit
