#include "gridmit/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridmit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ActiveConstraint {
    bool is_eq;
    int row;      // row index in A or G
    Vec normal;   // internal ">=" form: normal' x >= rhs
    double rhs;
    double flip;  // +1/-1, equality rows only (sign applied to the stored normal)
};

// Active-set working state: normals N, M = N' Q^-1 N and its Cholesky.
class WorkingSet {
public:
    explicit WorkingSet(const Vec& qinv) : qinv_(qinv) {}

    int size() const { return static_cast<int>(active_.size()); }
    const ActiveConstraint& at(int k) const { return active_[k]; }
    double dual(int k) const { return duals_[k]; }
    void add_to_dual(int k, double v) { duals_[k] += v; }

    void push(ActiveConstraint c, double dual) {
        Vec qn = qinv_.cwiseProduct(c.normal);
        const int q = size();
        Mat m2(q + 1, q + 1);
        m2.topLeftCorner(q, q) = m_;
        for (int k = 0; k < q; ++k) {
            double v = active_[k].normal.dot(qn);
            m2(k, q) = v;
            m2(q, k) = v;
        }
        m2(q, q) = c.normal.dot(qn);
        m_ = std::move(m2);
        active_.push_back(std::move(c));
        duals_.push_back(dual);
        refactor();
    }

    void drop(int k) {
        const int q = size();
        Mat m2(q - 1, q - 1);
        for (int i = 0, ii = 0; i < q; ++i) {
            if (i == k) continue;
            for (int j = 0, jj = 0; j < q; ++j) {
                if (j == k) continue;
                m2(ii, jj) = m_(i, j);
                ++jj;
            }
            ++ii;
        }
        m_ = std::move(m2);
        active_.erase(active_.begin() + k);
        duals_.erase(duals_.begin() + k);
        refactor();
    }

    // r = M^-1 N' Q^-1 n  and  z = Q^-1 (n - N r).
    void step_directions(const Vec& n, Vec& r, Vec& z) const {
        Vec qn = qinv_.cwiseProduct(n);
        const int q = size();
        if (q == 0) {
            r.resize(0);
            z = qn;
            return;
        }
        Vec d(q);
        for (int k = 0; k < q; ++k) d[k] = active_[k].normal.dot(qn);
        r = llt_.solve(d);
        Vec acc = n;
        for (int k = 0; k < q; ++k) acc -= r[k] * active_[k].normal;
        z = qinv_.cwiseProduct(acc);
    }

private:
    void refactor() {
        if (size() > 0) llt_.compute(m_);
    }

    Vec qinv_;
    std::vector<ActiveConstraint> active_;
    std::vector<double> duals_;
    Mat m_;
    Eigen::LLT<Mat> llt_;
};

// Rows of A that are linearly independent, via column-pivoted QR of A'.
std::vector<int> independent_rows(const Mat& A, double tol) {
    if (A.rows() == 0) return {};
    Eigen::ColPivHouseholderQR<Mat> qr(A.transpose());
    qr.setThreshold(tol);
    const int rank = static_cast<int>(qr.rank());
    std::vector<int> rows;
    for (int k = 0; k < rank; ++k)
        rows.push_back(static_cast<int>(qr.colsPermutation().indices()[k]));
    std::sort(rows.begin(), rows.end());
    return rows;
}

}  // namespace

QpResult solve_qp(const QpProblem& problem, const QpOptions& options) {
    const int n = problem.var_count();
    const int n_eq = static_cast<int>(problem.A.rows());
    const int n_in = static_cast<int>(problem.G.rows());
    if ((problem.q.array() <= 0.0).any())
        throw GridError("qp: Hessian diagonal must be strictly positive");

    QpResult result;
    result.eq_dual = Vec::Zero(n_eq);
    result.ineq_dual = Vec::Zero(n_in);

    auto certify = [&](QpResult& r) {
        r.status = QpStatus::Infeasible;
        if (options.certify_infeasibility) r.infeasibility = min_violation(problem);
    };

    // Consistency of the equality system (the active-set loop below only sees
    // an independent subset of the rows).
    std::vector<int> eq_rows = independent_rows(problem.A, options.pivot_tol);
    if (n_eq > 0) {
        Vec ls = problem.A.colPivHouseholderQr().solve(problem.b);
        if ((problem.A * ls - problem.b).lpNorm<Eigen::Infinity>() > 1e-7) {
            certify(result);
            return result;
        }
    }

    Vec qinv = problem.q.cwiseInverse();
    Vec x = -qinv.cwiseProduct(problem.c);
    WorkingSet ws(qinv);
    int iterations = 0;

    // Adds one constraint (">=" form) to the working set, taking partial dual
    // steps as needed. Returns false on inconsistency.
    auto add_constraint = [&](ActiveConstraint c) -> bool {
        double u_new = 0.0;
        while (true) {
            if (++iterations > options.max_iterations)
                throw SolverStall("qp: iteration budget exhausted");
            double violation = c.rhs - c.normal.dot(x);
            if (violation <= options.tol) {
                // Satisfied before full activation: keep it active anyway so
                // equality rows stay pinned; harmless for inequalities since
                // this branch is reached only after a partial step.
                ws.push(std::move(c), u_new);
                return true;
            }
            Vec r, z;
            ws.step_directions(c.normal, r, z);
            double zn = z.dot(c.normal);
            double t2 = zn > options.pivot_tol ? violation / zn : kInf;
            double t1 = kInf;
            int drop_k = -1;
            for (int k = 0; k < ws.size(); ++k) {
                if (ws.at(k).is_eq) continue;
                if (r[k] > options.pivot_tol) {
                    double t = ws.dual(k) / r[k];
                    if (t < t1) {
                        t1 = t;
                        drop_k = k;
                    }
                }
            }
            double t = std::min(t1, t2);
            if (t == kInf) return false;  // constraints inconsistent
            if (zn > options.pivot_tol) x += t * z;
            for (int k = 0; k < ws.size(); ++k) ws.add_to_dual(k, -t * r[k]);
            u_new += t;
            if (t == t2) {
                ws.push(std::move(c), u_new);
                return true;
            }
            ws.drop(drop_k);
        }
    };

    // Equality rows first; flip to ">=" form on the violated side.
    for (int row : eq_rows) {
        Vec a = problem.A.row(row).transpose();
        double rhs = problem.b[row];
        double flip = (a.dot(x) - rhs > 0.0) ? -1.0 : 1.0;
        ActiveConstraint c{true, row, flip * a, flip * rhs, flip};
        if (!add_constraint(std::move(c))) {
            certify(result);
            return result;
        }
    }

    // Main loop: repeatedly activate the most violated inequality.
    while (true) {
        if (++iterations > options.max_iterations)
            throw SolverStall("qp: iteration budget exhausted");
        int worst = -1;
        double worst_violation = options.tol;
        for (int i = 0; i < n_in; ++i) {
            double v = problem.G.row(i).dot(x) - problem.h[i];
            if (v > worst_violation) {
                worst_violation = v;
                worst = i;
            }
        }
        if (worst < 0) break;
        Vec g = problem.G.row(worst).transpose();
        ActiveConstraint c{false, worst, -g, -problem.h[worst], 1.0};
        if (!add_constraint(std::move(c))) {
            certify(result);
            return result;
        }
    }

    result.status = QpStatus::Optimal;
    result.x = x;
    for (int k = 0; k < ws.size(); ++k) {
        const ActiveConstraint& c = ws.at(k);
        if (c.is_eq)
            result.eq_dual[c.row] = -c.flip * ws.dual(k);
        else
            result.ineq_dual[c.row] = ws.dual(k);
    }
    result.objective =
        0.5 * x.dot(problem.q.cwiseProduct(x)) + problem.c.dot(x);
    result.iterations = iterations;
    return result;
}

double min_violation(const QpProblem& problem, Vec* x_out) {
    const int n = problem.var_count();
    const int n_eq = static_cast<int>(problem.A.rows());
    const int n_in = static_cast<int>(problem.G.rows());
    Vec x = Vec::Zero(n);

    auto phi = [&](const Vec& v) {
        double s = 0.0;
        if (n_eq > 0) s += 0.5 * (problem.A * v - problem.b).squaredNorm();
        for (int i = 0; i < n_in; ++i) {
            double g = problem.G.row(i).dot(v) - problem.h[i];
            if (g > 0) s += 0.5 * g * g;
        }
        return s;
    };

    double value = phi(x);
    for (int iter = 0; iter < 200 && value > 1e-20; ++iter) {
        Vec grad = Vec::Zero(n);
        Mat hess = Mat::Identity(n, n) * 1e-10;
        if (n_eq > 0) {
            Vec r = problem.A * x - problem.b;
            grad += problem.A.transpose() * r;
            hess += problem.A.transpose() * problem.A;
        }
        for (int i = 0; i < n_in; ++i) {
            double g = problem.G.row(i).dot(x) - problem.h[i];
            if (g > 0) {
                grad += g * problem.G.row(i).transpose();
                hess += problem.G.row(i).transpose() * problem.G.row(i);
            }
        }
        if (grad.lpNorm<Eigen::Infinity>() < 1e-12) break;
        Vec step = Eigen::LDLT<Mat>(hess).solve(-grad);
        double t = 1.0;
        double next = phi(x + step);
        while (next > value - 1e-16 && t > 1e-8) {
            t *= 0.5;
            next = phi(x + t * step);
        }
        if (next >= value) break;
        x += t * step;
        value = next;
    }
    if (x_out) *x_out = x;

    double total = 0.0;
    if (n_eq > 0) total += (problem.A * x - problem.b).cwiseAbs().sum();
    for (int i = 0; i < n_in; ++i)
        total += std::max(0.0, problem.G.row(i).dot(x) - problem.h[i]);
    return total;
}

}  // namespace gridmit
