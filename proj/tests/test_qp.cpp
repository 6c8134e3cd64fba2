#include "helpers.hpp"

#include "gridmit/qp.hpp"

#include <doctest.h>

#include <random>

using namespace gridmit;
using namespace gridmit::testing;

namespace {

QpProblem random_qp(std::mt19937& rng, int n, int me, int mi) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    QpProblem qp;
    qp.q = Vec(n);
    qp.c = Vec(n);
    for (int i = 0; i < n; ++i) {
        qp.q[i] = 0.5 + std::abs(unif(rng));
        qp.c[i] = unif(rng);
    }
    qp.A = Mat(me, n);
    qp.b = Vec(me);
    for (int r = 0; r < me; ++r) {
        for (int i = 0; i < n; ++i) qp.A(r, i) = unif(rng);
        qp.b[r] = 0.3 * unif(rng);
    }
    qp.G = Mat(mi, n);
    qp.h = Vec(mi);
    for (int r = 0; r < mi; ++r) {
        for (int i = 0; i < n; ++i) qp.G(r, i) = unif(rng);
        qp.h[r] = 0.5 + std::abs(unif(rng));  // keeps the origin-ish region feasible
    }
    return qp;
}

}  // namespace

TEST_CASE("unconstrained minimum") {
    QpProblem qp;
    qp.q = Vec::Constant(3, 2.0);
    qp.c = Vec::Constant(3, -2.0);
    qp.A = Mat(0, 3);
    qp.b = Vec(0);
    qp.G = Mat(0, 3);
    qp.h = Vec(0);
    QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::Optimal);
    CHECK((res.x - Vec::Constant(3, 1.0)).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("equality-constrained closed form") {
    // min 1/2 (x1^2 + x2^2) s.t. x1 + x2 = 2  ->  x = (1, 1), y = -1.
    QpProblem qp;
    qp.q = Vec::Ones(2);
    qp.c = Vec::Zero(2);
    qp.A = Mat::Ones(1, 2);
    qp.b = Vec::Constant(1, 2.0);
    qp.G = Mat(0, 2);
    qp.h = Vec(0);
    QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::Optimal);
    CHECK(res.x[0] == doctest::Approx(1.0));
    CHECK(res.x[1] == doctest::Approx(1.0));
    CHECK(res.eq_dual[0] == doctest::Approx(-1.0));
    // Stationarity in the stated convention.
    Vec grad = qp.q.asDiagonal() * res.x + qp.c + qp.A.transpose() * res.eq_dual;
    CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("active box constraint") {
    // min 1/2 x^2 - 3x s.t. x <= 1  ->  x = 1, z = 2.
    QpProblem qp;
    qp.q = Vec::Ones(1);
    qp.c = Vec::Constant(1, -3.0);
    qp.A = Mat(0, 1);
    qp.b = Vec(0);
    qp.G = Mat::Ones(1, 1);
    qp.h = Vec::Ones(1);
    QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::Optimal);
    CHECK(res.x[0] == doctest::Approx(1.0));
    CHECK(res.ineq_dual[0] == doctest::Approx(2.0));
}

TEST_CASE("matches the brute-force active-set oracle on random problems") {
    std::mt19937 rng(101);
    int solved = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> nvar(1, 4), neq(0, 2), nineq(0, 5);
        int n = nvar(rng);
        QpProblem qp = random_qp(rng, n, std::min(neq(rng), n - 1), nineq(rng));
        auto oracle = brute_force_qp(qp);
        QpResult res = solve_qp(qp);
        if (res.status == QpStatus::Optimal) {
            REQUIRE_MESSAGE(oracle.has_value(), "solver optimal but oracle infeasible");
            CHECK((res.x - *oracle).lpNorm<Eigen::Infinity>() < 1e-6);
            // Stationarity of the returned multipliers.
            Vec grad = qp.q.asDiagonal() * res.x + qp.c;
            if (qp.b.size() > 0) grad += qp.A.transpose() * res.eq_dual;
            if (qp.h.size() > 0) grad += qp.G.transpose() * res.ineq_dual;
            CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-7);
            if (qp.h.size() > 0) CHECK(res.ineq_dual.minCoeff() >= -1e-9);
            ++solved;
        } else {
            CHECK_FALSE(oracle.has_value());
        }
    }
    CHECK(solved > 100);  // most random instances should be feasible
}

TEST_CASE("inconsistent equalities are certified infeasible") {
    QpProblem qp;
    qp.q = Vec::Ones(1);
    qp.c = Vec::Zero(1);
    qp.A = Mat(2, 1);
    qp.A << 1.0, 1.0;
    qp.b = Vec(2);
    qp.b << 0.0, 1.0;
    qp.G = Mat(0, 1);
    qp.h = Vec(0);
    QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::Infeasible);
    CHECK(res.infeasibility > 0.1);
}

TEST_CASE("conflicting bounds are certified infeasible") {
    // x <= -1 and -x <= -2 (x >= 2).
    QpProblem qp;
    qp.q = Vec::Ones(1);
    qp.c = Vec::Zero(1);
    qp.A = Mat(0, 1);
    qp.b = Vec(0);
    qp.G = Mat(2, 1);
    qp.G << 1.0, -1.0;
    qp.h = Vec(2);
    qp.h << -1.0, -2.0;
    QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::Infeasible);
    CHECK(res.infeasibility > 1.0);  // gap is 3
}

TEST_CASE("redundant equality rows are tolerated") {
    QpProblem qp;
    qp.q = Vec::Ones(2);
    qp.c = Vec::Zero(2);
    qp.A = Mat(2, 2);
    qp.A << 1.0, 1.0, 2.0, 2.0;  // second row is dependent but consistent
    qp.b = Vec(2);
    qp.b << 2.0, 4.0;
    qp.G = Mat(0, 2);
    qp.h = Vec(0);
    QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::Optimal);
    CHECK(res.x[0] == doctest::Approx(1.0));
}

TEST_CASE("min_violation is zero for feasible systems") {
    std::mt19937 rng(55);
    QpProblem qp = random_qp(rng, 3, 1, 3);
    CHECK(min_violation(qp) < 1e-6);
}
