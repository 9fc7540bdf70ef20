#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "park/solver.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace park;

TEST_CASE("one-variable lower bound")
{
    ConicProgram p;
    VarId x = p.add_variable("x", 3.0, kInf);
    p.add_objective(x, 1.0);
    auto rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.value(x) == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(rep.objective == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("equality-constrained quadratic")
{
    // min (x-1)^2 + (y-2)^2  s.t.  x + y = 1   ->  (0, 1)
    ConicProgram p;
    VarId x = p.add_variable("x");
    VarId y = p.add_variable("y");
    p.add_quadratic_objective(x, 1.0);
    p.add_objective(x, -2.0);
    p.add_quadratic_objective(y, 1.0);
    p.add_objective(y, -4.0);
    p.add_objective_constant(5.0);
    p.add_row({{x, 1.0}, {y, 1.0}}, Rel::Eq, 1.0);
    auto rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.value(x) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(rep.value(y) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.objective == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("second-order cone norm")
{
    // min t s.t. ||(3,4)|| <= t  ->  t = 5
    ConicProgram p;
    VarId t = p.add_variable("t");
    p.add_objective(t, 1.0);
    p.add_soc(AffineExpr(t), {AffineExpr(3.0), AffineExpr(4.0)});
    auto rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.value(t) == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("soc with variable entries")
{
    // min x + y s.t. ||(x-1, y-1)|| <= 1: optimum at (1-r,1-r), r = 1/sqrt(2)
    ConicProgram p;
    VarId x = p.add_variable("x");
    VarId y = p.add_variable("y");
    p.add_objective(x, 1.0);
    p.add_objective(y, 1.0);
    p.add_soc(AffineExpr(1.0),
              {AffineExpr(x, 1.0, -1.0), AffineExpr(y, 1.0, -1.0)});
    auto rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    double r = 1.0 / std::sqrt(2.0);
    CHECK(rep.value(x) == doctest::Approx(1.0 - r).epsilon(1e-6));
    CHECK(rep.value(y) == doctest::Approx(1.0 - r).epsilon(1e-6));
}

TEST_CASE("square-leq-linear encoding")
{
    // min y s.t. x = 3, x^2 <= y  ->  y = 9
    ConicProgram p;
    VarId x = p.add_variable("x", 3.0, 3.0);
    VarId y = p.add_variable("y", 0.0, kInf);
    p.add_objective(y, 1.0);
    p.add_soc(AffineExpr(y, 0.5, 0.5),
              {AffineExpr(x, 1.0), AffineExpr(y, 0.5, -0.5)});
    auto rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.value(y) == doctest::Approx(9.0).epsilon(1e-6));
}

TEST_CASE("infeasible box is reported, not thrown")
{
    ConicProgram p;
    VarId x = p.add_variable("x", 0.0, 1.0);
    p.add_objective(x, 1.0);
    p.add_row({{x, 1.0}}, Rel::Ge, 2.0);
    auto rep = solve(p);
    CHECK(rep.status == SolveStatus::Infeasible);
}

TEST_CASE("unbounded objective detected")
{
    ConicProgram p;
    VarId x = p.add_variable("x", -kInf, 5.0);
    p.add_objective(x, 1.0);
    auto rep = solve(p);
    CHECK(rep.status == SolveStatus::Unbounded);
}

TEST_CASE("lp with equalities and inequalities")
{
    // min -x - 2y s.t. x + y <= 4, x <= 2, y <= 3, x,y >= 0 -> (1,3), obj -7
    ConicProgram p;
    VarId x = p.add_variable("x", 0.0, 2.0);
    VarId y = p.add_variable("y", 0.0, 3.0);
    p.add_objective(x, -1.0);
    p.add_objective(y, -2.0);
    p.add_row({{x, 1.0}, {y, 1.0}}, Rel::Le, 4.0);
    auto rep = solve(p);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.objective == doctest::Approx(-7.0).epsilon(1e-7));
    CHECK(rep.value(x) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.value(y) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("verification by substitution on random feasible LPs")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        int n = 3 + static_cast<int>(rng() % 4);
        ConicProgram p;
        std::vector<VarId> xs;
        std::vector<double> x0;
        for (int i = 0; i < n; ++i) {
            xs.push_back(p.add_variable("x" + std::to_string(i), -5.0, 5.0));
            x0.push_back(2.0 * U(rng));
        }
        // rows built around a known interior point keep the program feasible
        for (int r = 0; r < n; ++r) {
            std::vector<LinTerm> terms;
            double lhs = 0.0;
            for (int i = 0; i < n; ++i) {
                double a = U(rng);
                terms.push_back({xs[i], a});
                lhs += a * x0[i];
            }
            p.add_row(terms, Rel::Le, lhs + 0.5);
        }
        for (int i = 0; i < n; ++i)
            p.add_objective(xs[i], U(rng));
        auto rep = solve(p);
        REQUIRE(rep.status == SolveStatus::Optimal);
        auto v = verify_solution(p, rep.x);
        CHECK(v.max_violation < 1e-7);
    }
}

TEST_CASE("objective scaling leaves the argmin unchanged")
{
    ConicProgram p;
    VarId x = p.add_variable("x", 0.0, 10.0);
    VarId y = p.add_variable("y", 0.0, 10.0);
    p.add_row({{x, 1.0}, {y, 2.0}}, Rel::Ge, 4.0);
    p.add_objective(x, 3.0);
    p.add_objective(y, 1.0);
    auto r1 = solve(p);

    ConicProgram q;
    VarId x2 = q.add_variable("x", 0.0, 10.0);
    VarId y2 = q.add_variable("y", 0.0, 10.0);
    q.add_row({{x2, 1.0}, {y2, 2.0}}, Rel::Ge, 4.0);
    q.add_objective(x2, 300.0);
    q.add_objective(y2, 100.0);
    auto r2 = solve(q);

    REQUIRE(r1.status == SolveStatus::Optimal);
    REQUIRE(r2.status == SolveStatus::Optimal);
    CHECK(r1.value(x) == doctest::Approx(r2.value(x2)).epsilon(1e-6));
    CHECK(r1.value(y) == doctest::Approx(r2.value(y2)).epsilon(1e-6));
}

TEST_CASE("deterministic across repeated solves")
{
    ConicProgram p;
    VarId x = p.add_variable("x", 0.0, 4.0);
    VarId y = p.add_variable("y", 0.0, 4.0);
    p.add_objective(x, 1.0);
    p.add_objective(y, -0.5);
    p.add_row({{x, 1.0}, {y, 1.0}}, Rel::Ge, 1.0);
    auto a = solve(p);
    auto b = solve(p);
    REQUIRE(a.status == SolveStatus::Optimal);
    CHECK(a.value(x) == b.value(x));
    CHECK(a.value(y) == b.value(y));
    CHECK(a.objective == b.objective);
}

TEST_CASE("solver instance reuse across same-pattern programs")
{
    ConicSolver solver;
    for (int k = 1; k <= 5; ++k) {
        ConicProgram p;
        VarId x = p.add_variable("x", 0.0, kInf);
        p.add_objective(x, 1.0);
        p.add_row({{x, 1.0}}, Rel::Ge, static_cast<double>(k));
        auto rep = solver.solve(p);
        REQUIRE(rep.status == SolveStatus::Optimal);
        CHECK(rep.value(x) == doctest::Approx(k).epsilon(1e-7));
    }
}

TEST_CASE("program dump is parseable text")
{
    ConicProgram p;
    VarId x = p.add_variable("x", 0.0, 1.0);
    p.add_objective(x, 2.0);
    p.add_row({{x, 1.0}}, Rel::Le, 0.7, "cap");
    p.add_soc(AffineExpr(x, 1.0, 1.0), {AffineExpr(x, 1.0)}, "dummy");
    std::ostringstream os;
    dump_program(p, os);
    auto text = os.str();
    CHECK(text.find("cap") != std::string::npos);
    CHECK(text.find("dummy") != std::string::npos);
    CHECK(text.find("x") != std::string::npos);
}
