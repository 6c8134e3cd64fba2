#include "gridmit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gridmit {

double Trajectory::max_abs_dual() const {
    if (duals.size() == 0) return 0.0;
    return duals.cwiseAbs().maxCoeff();
}

Vec ZeroController::control(const Vec&, const Vec&, const Vec&) const {
    return Vec::Zero(n_);
}

DroopController::DroopController(const GridCase& grid, double bound) : bound_(bound) {
    gain_.resize(grid.bus_count());
    for (int j = 0; j < grid.bus_count(); ++j) gain_[j] = grid.buses()[j].alpha_gen;
}

Vec DroopController::control(const Vec& omega, const Vec&, const Vec&) const {
    return (gain_.cwiseProduct(omega)).cwiseMax(-bound_).cwiseMin(bound_);
}

UcController::UcController(const ControlProblem& problem, const UcGains& gains)
    : problem_(problem), gains_(gains) {
    const GridCase& grid = *problem_.grid;
    n_ = grid.bus_count();
    m_ = problem_.topology.line_count();
    for (int a = 0; a < problem_.areas.count(); ++a)
        if (!problem_.ace_lifted[a]) active_areas_.push_back(a);
    dg_lo_ = Vec::Zero(n_);
    dg_hi_ = Vec::Zero(n_);
    dl_lo_ = Vec::Zero(n_);
    dl_hi_ = Vec::Zero(n_);
    alpha_gen_ = Vec::Ones(n_);
    alpha_load_ = Vec::Ones(n_);
    for (size_t k = 0; k < problem_.gen_vars.size(); ++k) {
        int j = problem_.gen_vars[k];
        dg_lo_[j] = problem_.dg_lower[k];
        dg_hi_[j] = problem_.dg_upper[k];
        alpha_gen_[j] = grid.buses()[j].alpha_gen;
    }
    for (size_t k = 0; k < problem_.load_vars.size(); ++k) {
        int j = problem_.load_vars[k];
        dl_lo_[j] = problem_.dl_lower[k];
        dl_hi_[j] = problem_.dl_upper[k];
        alpha_load_[j] = grid.buses()[j].alpha_load;
    }
}

// State layout: [nu (n), theta_v (n), lambda (active areas), mu+ (m), mu- (m)].
// mu blocks exist only for the UC variant.
int UcController::state_dim() const {
    int d = 2 * n_ + static_cast<int>(active_areas_.size());
    if (problem_.kind == ControllerKind::Uc) d += 2 * m_;
    return d;
}

Vec UcController::initial_state() const {
    // Warm-start the virtual angles at the post-contingency flow solution
    // with zero control: a failure whose redistributed flows already satisfy
    // every limit then starts at (and stays at) the d = 0 equilibrium, and
    // the monitored multipliers move only when actual congestion exists.
    Vec s = Vec::Zero(state_dim());
    Vec p = problem_.p0();
    for (const auto& island : islands(problem_.topology)) {
        double sum = 0.0;
        for (int v : island) sum += p[v];
        double share = sum / static_cast<double>(island.size());
        for (int v : island) p[v] -= share;
    }
    s.segment(n_, n_) = laplacian_pinv_solve(problem_.topology, p);
    return s;
}

Vec UcController::control_from_nu(const Vec& nu) const {
    Vec d = Vec::Zero(n_);
    for (int j = 0; j < n_; ++j) {
        double dg = std::clamp(alpha_gen_[j] * nu[j], dg_lo_[j], dg_hi_[j]);
        double dl = std::clamp(alpha_load_[j] * nu[j], dl_lo_[j], dl_hi_[j]);
        d[j] = dg + dl;
    }
    return d;
}

Vec UcController::control(const Vec&, const Vec&, const Vec& state) const {
    return control_from_nu(state.head(n_));
}

Vec UcController::state_derivative(const Vec&, const Vec&, const Vec& state) const {
    const Topology& topo = problem_.topology;
    const bool limits = problem_.kind == ControllerKind::Uc;
    const int na = static_cast<int>(active_areas_.size());
    const Vec nu = state.head(n_);
    const Vec theta = state.segment(n_, n_);
    const Vec lambda = state.segment(2 * n_, na);
    Vec mu_plus, mu_minus;
    if (limits) {
        mu_plus = state.segment(2 * n_ + na, m_);
        mu_minus = state.segment(2 * n_ + na + m_, m_);
    }

    const Vec d = control_from_nu(nu);
    const Vec p0 = problem_.p0();

    // Virtual flows and residuals.
    Vec fv(m_);
    for (int e = 0; e < m_; ++e)
        fv[e] = topo.susceptance(e) * (theta[topo.from_index(e)] - theta[topo.to_index(e)]);
    Vec balance = p0 - d;  // minus C fv below
    for (int e = 0; e < m_; ++e) {
        balance[topo.from_index(e)] -= fv[e];
        balance[topo.to_index(e)] += fv[e];
    }
    Vec ace_res = Vec::Zero(na);
    for (int e = 0; e < m_; ++e) {
        int ai = problem_.areas.area_of[topo.from_index(e)];
        int aj = problem_.areas.area_of[topo.to_index(e)];
        if (ai == aj) continue;
        for (int r = 0; r < na; ++r) {
            if (active_areas_[r] == ai) ace_res[r] += fv[e];
            if (active_areas_[r] == aj) ace_res[r] -= fv[e];
        }
    }
    for (int r = 0; r < na; ++r) ace_res[r] -= problem_.ace0[active_areas_[r]];

    // w = nu + rho*balance - E_T' (lambda + rho*ace_res), then
    // theta_dot = k_theta * (C B C' w - C B (mu+ - mu-)).
    const double rho = gains_.augmentation;
    Vec w = nu + rho * balance;
    for (int j = 0; j < n_; ++j) {
        int a = problem_.areas.area_of[j];
        for (int r = 0; r < na; ++r)
            if (active_areas_[r] == a) w[j] -= lambda[r] + rho * ace_res[r];
    }
    Vec theta_dot = Vec::Zero(n_);
    for (int e = 0; e < m_; ++e) {
        int i = topo.from_index(e), j = topo.to_index(e);
        double across = topo.susceptance(e) * (w[i] - w[j]);
        if (limits) across -= topo.susceptance(e) * (mu_plus[e] - mu_minus[e]);
        theta_dot[i] += across;
        theta_dot[j] -= across;
    }

    Vec out(state_dim());
    out.head(n_) = gains_.k_nu * balance;
    out.segment(n_, n_) = gains_.k_theta * theta_dot;
    out.segment(2 * n_, na) = gains_.k_lambda * ace_res;
    if (limits) {
        for (int e = 0; e < m_; ++e) {
            out[2 * n_ + na + e] = gains_.k_mu * (fv[e] - topo.limit(e));
            out[2 * n_ + na + m_ + e] = gains_.k_mu * (-topo.limit(e) - fv[e]);
        }
    }
    return out;
}

void UcController::project(Vec& state) const {
    if (problem_.kind != ControllerKind::Uc) return;
    const int na = static_cast<int>(active_areas_.size());
    for (int k = 0; k < 2 * m_; ++k) {
        double& v = state[2 * n_ + na + k];
        if (v < 0.0) v = 0.0;
    }
}

Vec UcController::duals(const Vec& state) const {
    const int na = static_cast<int>(active_areas_.size());
    const int extra = problem_.kind == ControllerKind::Uc ? 2 * m_ : 0;
    return state.segment(2 * n_, na + extra);
}

std::vector<std::string> UcController::dual_names() const {
    std::vector<std::string> names;
    for (int a : active_areas_)
        names.push_back("ace_area" + std::to_string(problem_.areas.ids[a]));
    if (problem_.kind == ControllerKind::Uc) {
        const Topology& topo = problem_.topology;
        for (int e = 0; e < m_; ++e) {
            const Line& l = problem_.grid->lines()[topo.line_indices()[e]];
            names.push_back("mu_hi_" + std::to_string(l.from) + "_" + std::to_string(l.to));
        }
        for (int e = 0; e < m_; ++e) {
            const Line& l = problem_.grid->lines()[topo.line_indices()[e]];
            names.push_back("mu_lo_" + std::to_string(l.from) + "_" + std::to_string(l.to));
        }
    }
    return names;
}

namespace {

struct PhysicsWorkspace {
    Vec minv;  // 1/M per bus
    Vec damping;
};

// Combined derivative of (omega, f, controller state).
void derivative(const GridCase& grid, const Topology& topo, const Vec& p0,
                const PhysicsWorkspace& ws, DynController& ctrl, const Vec& omega,
                const Vec& flows, const Vec& cstate, Vec& domega, Vec& dflows,
                Vec& dcstate) {
    const int n = grid.bus_count();
    const int m = topo.line_count();
    Vec d = ctrl.control(omega, flows, cstate);
    Vec acc = p0 - d - ws.damping.cwiseProduct(omega);
    for (int e = 0; e < m; ++e) {
        acc[topo.from_index(e)] -= flows[e];
        acc[topo.to_index(e)] += flows[e];
    }
    domega = ws.minv.cwiseProduct(acc);
    dflows.resize(m);
    for (int e = 0; e < m; ++e)
        dflows[e] =
            topo.susceptance(e) * (omega[topo.from_index(e)] - omega[topo.to_index(e)]);
    dcstate = ctrl.state_derivative(omega, flows, cstate);
}

}  // namespace

Trajectory simulate(const GridCase& grid, const Topology& surviving, const Vec& p0,
                    const Vec& f0_surviving, DynController& controller,
                    const SimulateOptions& options) {
    const int n = grid.bus_count();
    const int m = surviving.line_count();
    if (options.dt <= 0.0 || options.horizon < options.dt)
        throw GridError("simulate: invalid dt/horizon");
    if (f0_surviving.size() != m) throw GridError("simulate: f0 dimension mismatch");

    PhysicsWorkspace ws;
    ws.minv.resize(n);
    ws.damping.resize(n);
    for (int j = 0; j < n; ++j) {
        ws.minv[j] = 1.0 / grid.buses()[j].inertia;
        ws.damping[j] = grid.buses()[j].damping;
    }

    Vec omega = Vec::Zero(n);
    Vec flows = f0_surviving;
    Vec cstate = controller.initial_state();

    const int steps = static_cast<int>(std::llround(options.horizon / options.dt));
    const int sample_every =
        std::max(1, static_cast<int>(std::llround(options.output_interval / options.dt)));

    Trajectory traj;
    traj.dual_names = controller.dual_names();
    const std::vector<std::string>& dual_name_list = traj.dual_names;
    const int nd = static_cast<int>(traj.dual_names.size());
    std::vector<double> times;
    std::vector<Vec> omega_s, flow_s, dual_s;
    bool warned = false;

    auto sample = [&](double t) {
        times.push_back(t);
        omega_s.push_back(omega);
        flow_s.push_back(flows);
        if (nd > 0) dual_s.push_back(controller.duals(cstate));
    };
    sample(0.0);

    Vec k1o, k1f, k1c, k2o, k2f, k2c, k3o, k3f, k3c, k4o, k4f, k4c;
    for (int step = 1; step <= steps; ++step) {
        const double h = options.dt;
        derivative(grid, surviving, p0, ws, controller, omega, flows, cstate, k1o, k1f, k1c);
        derivative(grid, surviving, p0, ws, controller, omega + 0.5 * h * k1o,
                   flows + 0.5 * h * k1f, cstate + 0.5 * h * k1c, k2o, k2f, k2c);
        derivative(grid, surviving, p0, ws, controller, omega + 0.5 * h * k2o,
                   flows + 0.5 * h * k2f, cstate + 0.5 * h * k2c, k3o, k3f, k3c);
        derivative(grid, surviving, p0, ws, controller, omega + h * k3o, flows + h * k3f,
                   cstate + h * k3c, k4o, k4f, k4c);
        omega += h / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o);
        flows += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        if (cstate.size() > 0) {
            cstate += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
            controller.project(cstate);
        }

        double t = step * h;
        double magnitude = std::max(omega.cwiseAbs().maxCoeff(),
                                    m > 0 ? flows.cwiseAbs().maxCoeff() : 0.0);
        if (cstate.size() > 0)
            magnitude = std::max(magnitude, cstate.cwiseAbs().maxCoeff());
        if (magnitude > options.blowup_bound)
            throw NumericalBlowup("state magnitude " + std::to_string(magnitude) +
                                  " at t=" + std::to_string(t));
        if (!warned && options.dual_threshold > 0.0 && nd > 0) {
            Vec du = controller.duals(cstate);
            // Equality-constraint multipliers are only determined up to the
            // row space of the equality block, so their trajectories carry a
            // gauge component; threshold only the line-limit multipliers,
            // which are the ones that diverge exactly when the problem is
            // infeasible. Fall back to all duals when none exist.
            double watched = 0.0;
            bool any = false;
            for (int k = 0; k < nd; ++k) {
                if (dual_name_list[k].rfind("mu_", 0) != 0) continue;
                any = true;
                watched = std::max(watched, std::abs(du[k]));
            }
            if (!any) watched = du.cwiseAbs().maxCoeff();
            if (watched > options.dual_threshold) {
                warned = true;
                traj.events.push_back({t, "severe_warning",
                                       "dual crossed " +
                                           std::to_string(options.dual_threshold)});
            }
        }
        if (step % sample_every == 0) sample(t);
    }

    traj.times = std::move(times);
    const int ns = static_cast<int>(traj.times.size());
    traj.omega.resize(ns, n);
    traj.flows.resize(ns, m);
    traj.duals.resize(ns, nd);
    for (int i = 0; i < ns; ++i) {
        traj.omega.row(i) = omega_s[i].transpose();
        traj.flows.row(i) = flow_s[i].transpose();
        if (nd > 0) traj.duals.row(i) = dual_s[i].transpose();
    }
    traj.final_control = controller.control(omega, flows, cstate);
    return traj;
}

DroopEquilibrium droop_equilibrium(const GridCase& grid, const Topology& topology,
                                   const Vec& p0) {
    const int n = grid.bus_count();
    DroopEquilibrium eq;
    eq.d = Vec::Zero(n);
    eq.omega = Vec::Zero(n);
    auto comps = islands(topology);
    for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
        double imbalance = 0.0, denom = 0.0;
        for (int j : comps[c]) {
            imbalance += p0[j];
            denom += grid.buses()[j].alpha_gen + grid.buses()[j].damping;
        }
        if (std::abs(imbalance) > kBalanceTolerance && denom <= 0.0)
            throw DegenerateIsland(c, imbalance);
        double share = denom > 0.0 ? imbalance / denom : 0.0;
        for (int j : comps[c]) {
            eq.d[j] = grid.buses()[j].alpha_gen * share;
            eq.omega[j] = share;  // D_j omega_j = D_j * share
        }
    }
    Vec damping(n);
    for (int j = 0; j < n; ++j) damping[j] = grid.buses()[j].damping;
    Vec post = p0 - eq.d - damping.cwiseProduct(eq.omega);
    eq.flows = dc_power_flow(topology, post, 1e-6).flows;
    return eq;
}

Detection detect_severe(const ControlProblem& problem, const Vec& f0_surviving,
                        double threshold, double t_max, const SimulateOptions& options,
                        const UcGains& gains) {
    if (threshold <= 0.0) throw GridError("detect_severe: threshold must be > 0");
    if (t_max <= 0.0) throw GridError("detect_severe: t_max must be > 0");
    UcController controller(problem, gains);
    SimulateOptions opts = options;
    opts.horizon = t_max;
    opts.dual_threshold = threshold;
    Trajectory traj = simulate(*problem.grid, problem.topology, problem.p0(),
                               f0_surviving, controller, opts);
    Detection det;
    // Report the same quantity the threshold watches: the line-limit
    // multipliers when present, everything otherwise.
    bool any_mu = false;
    for (int k = 0; k < static_cast<int>(traj.dual_names.size()); ++k) {
        if (traj.dual_names[k].rfind("mu_", 0) != 0) continue;
        any_mu = true;
        det.max_dual_seen =
            std::max(det.max_dual_seen, traj.duals.col(k).cwiseAbs().maxCoeff());
    }
    if (!any_mu) det.max_dual_seen = traj.max_abs_dual();
    for (const auto& ev : traj.events) {
        if (ev.kind == "severe_warning") {
            det.severe = true;
            det.warning_time = ev.t;
            break;
        }
    }
    return det;
}

void write_trajectory_csv(const Trajectory& trajectory, const GridCase& grid,
                          const Topology& surviving, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw GridError("cannot write " + path);
    out << "t";
    for (int j = 0; j < grid.bus_count(); ++j) out << ",omega_bus" << grid.bus_id(j);
    for (int e = 0; e < surviving.line_count(); ++e) {
        const Line& l = grid.lines()[surviving.line_indices()[e]];
        out << ",f_" << l.from << "_" << l.to;
    }
    for (const auto& name : trajectory.dual_names) out << "," << name;
    out << ",event\n";
    size_t next_event = 0;
    for (int i = 0; i < static_cast<int>(trajectory.times.size()); ++i) {
        out << trajectory.times[i];
        for (int j = 0; j < trajectory.omega.cols(); ++j) out << "," << trajectory.omega(i, j);
        for (int e = 0; e < trajectory.flows.cols(); ++e) out << "," << trajectory.flows(i, e);
        for (int k = 0; k < trajectory.duals.cols(); ++k) out << "," << trajectory.duals(i, k);
        std::string flag;
        while (next_event < trajectory.events.size() &&
               trajectory.events[next_event].t <= trajectory.times[i]) {
            flag = trajectory.events[next_event].kind;
            ++next_event;
        }
        out << "," << flag << "\n";
    }
}

}  // namespace gridmit
