#pragma once

// Conic/quadratic program container and interior-point solve interface.
// Hosts programs of the form
//
//   min  c'x + sum_k w_k x_k^2
//   s.t. linear equalities / inequalities
//        ||y|| <= t   second-order-cone blocks, entries affine in x
//
// Quadratic terms are restricted to nonnegative weights on squares, so the
// objective is convex by construction. Infeasibility is reported through
// SolveReport::status, never thrown: callers (notably the bound-tightening
// loop) have to observe it and react.

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace park {

using VarId = int;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinTerm {
    VarId var;
    double coeff;
};

/// Affine expression sum(coeff * x) + constant.
struct AffineExpr {
    std::vector<LinTerm> terms;
    double constant = 0.0;

    AffineExpr() = default;
    AffineExpr(double c) : constant(c) {}
    AffineExpr(VarId v, double coeff = 1.0, double c = 0.0)
        : terms{{v, coeff}}, constant(c) {}

    AffineExpr& add(VarId v, double coeff)
    {
        terms.push_back({v, coeff});
        return *this;
    }
};

enum class Rel { Eq, Le, Ge };

struct LinearRow {
    std::vector<LinTerm> terms;
    Rel rel = Rel::Eq;
    double rhs = 0.0;
    std::string tag;
};

/// ||entries|| <= radius with affine radius and entries.
struct SocBlock {
    AffineExpr radius;
    std::vector<AffineExpr> entries;
    std::string tag;
};

class ConicProgram {
  public:
    VarId add_variable(std::string name, double lb = -kInf, double ub = kInf);
    void set_bounds(VarId v, double lb, double ub);

    void add_objective(VarId v, double coeff);
    /// Adds weight * x^2 to the objective; weight must be >= 0.
    void add_quadratic_objective(VarId v, double weight);
    void add_objective_constant(double c) { obj_constant_ += c; }

    int add_row(std::vector<LinTerm> terms, Rel rel, double rhs,
                std::string tag = {});
    int add_soc(AffineExpr radius, std::vector<AffineExpr> entries,
                std::string tag = {});

    int num_variables() const { return static_cast<int>(names_.size()); }
    const std::string& name(VarId v) const { return names_[v]; }
    double lower(VarId v) const { return lb_[v]; }
    double upper(VarId v) const { return ub_[v]; }
    const std::vector<double>& linear_objective() const { return obj_lin_; }
    const std::vector<double>& quadratic_objective() const { return obj_quad_; }
    double objective_constant() const { return obj_constant_; }
    const std::vector<LinearRow>& rows() const { return rows_; }
    const std::vector<SocBlock>& soc_blocks() const { return socs_; }

    /// Objective value at a candidate point.
    double objective_value(const std::vector<double>& x) const;

  private:
    std::vector<std::string> names_;
    std::vector<double> lb_, ub_;
    std::vector<double> obj_lin_;
    std::vector<double> obj_quad_;
    double obj_constant_ = 0.0;
    std::vector<LinearRow> rows_;
    std::vector<SocBlock> socs_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(SolveStatus s);

struct SolveTolerances {
    double feas = 1e-9;
    double abs_gap = 1e-9;
    double rel_gap = 1e-9;
    int max_iterations = 100;
};

struct SolveReport {
    SolveStatus status = SolveStatus::IterationLimit;
    std::vector<double> x;
    double objective = 0.0;
    double res_primal = kInf;
    double res_dual = kInf;
    double gap = kInf;
    int iterations = 0;

    double value(VarId v) const { return x[v]; }
    bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Interior-point solver. An instance caches the symbolic KKT factorization,
/// so reusing one solver across structurally identical programs (the per-slot
/// case) skips the analyze phase. Distinct instances may run concurrently;
/// a single instance is not thread-safe.
class ConicSolver {
  public:
    ConicSolver();
    ~ConicSolver();
    ConicSolver(ConicSolver&&) noexcept;
    ConicSolver& operator=(ConicSolver&&) noexcept;

    SolveReport solve(const ConicProgram& p, const SolveTolerances& tol = {});

  private:
    struct Impl;
    Impl* impl_;
};

/// One-shot convenience wrapper.
SolveReport solve(const ConicProgram& p, const SolveTolerances& tol = {});

/// Re-checks a candidate point against every stored row, bound and cone by
/// direct substitution. Deliberately independent of the solve path.
struct ViolationReport {
    double max_violation = 0.0;
    std::string worst_constraint;
    bool ok(double tol) const { return max_violation <= tol; }
};

ViolationReport verify_solution(const ConicProgram& p,
                                const std::vector<double>& x);

/// Plain-text standard-form dump for debugging.
void dump_program(const ConicProgram& p, std::ostream& os);

} // namespace park
