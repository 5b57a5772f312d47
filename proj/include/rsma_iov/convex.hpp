#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace rsma_iov::convex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Sparse affine expression sum_i coef[i] * x[index[i]] + constant.
struct AffineForm {
  std::vector<int> index;
  std::vector<double> coef;
  double constant = 0.0;

  AffineForm() = default;
  explicit AffineForm(double c) : constant(c) {}

  AffineForm& add(int var, double c) {
    index.push_back(var);
    coef.push_back(c);
    return *this;
  }
  AffineForm& shift(double c) {
    constant += c;
    return *this;
  }
  double eval(std::span<const double> x) const;
};

enum class ConstraintKind { kLinear, kQuadratic, kPowerCone };

// Linear:    affine(x) <= 0
// Quadratic: sum_j squares[j](x)^2 + affine(x) <= 0
// PowerCone: 2^x[exponent_var] - x[bound_var] <= 0
struct Constraint {
  ConstraintKind kind = ConstraintKind::kLinear;
  AffineForm affine;
  std::vector<AffineForm> squares;
  int exponent_var = -1;
  int bound_var = -1;
  std::string label;

  double value(std::span<const double> x) const;
};

struct Variable {
  std::string name;
  double lower = -kInf;
  double upper = kInf;
  bool fixed = false;
  double fixed_value = 0.0;
};

// Objective: affine(x) + sum_j squares[j](x)^2. Programs are built once and
// not modified while a solve is running.
class Program {
 public:
  int add_variable(std::string name, double lower = -kInf, double upper = kInf);
  int add_block(const std::string& name, int count, double lower = -kInf,
                double upper = kInf);
  void fix(int var, double value);
  void set_bounds(int var, double lower, double upper);

  void add_linear(AffineForm f, std::string label);
  void add_quadratic(std::vector<AffineForm> squares, AffineForm f,
                     std::string label);
  void add_power_cone(int exponent_var, int bound_var, std::string label);

  void add_objective_linear(int var, double c) { objective_.add(var, c); }
  void add_objective_constant(double c) { objective_.shift(c); }
  void add_objective_square(AffineForm f) {
    objective_squares_.push_back(std::move(f));
  }

  int num_variables() const { return static_cast<int>(variables_.size()); }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const AffineForm& objective_affine() const { return objective_; }
  const std::vector<AffineForm>& objective_squares() const {
    return objective_squares_;
  }

  double objective(std::span<const double> x) const;
  // Largest violation over constraints and variable bounds (0 if feasible).
  double max_violation(std::span<const double> x) const;

  // Plain-text listing, one variable or constraint per line.
  std::string dump() const;

 private:
  void check_var(int var) const;

  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  AffineForm objective_;
  std::vector<AffineForm> objective_squares_;
};

enum class SolveStatus { kOptimal, kInfeasible, kIterationLimit };

const char* to_string(SolveStatus status);

struct SolverOptions {
  double feas_tol = 1e-7;
  double opt_tol = 1e-6;
  int max_iters = 200;          // Newton steps, phase 1 included
  double barrier_factor = 0.2;  // mu <- factor * mu, i.e. t <- t / factor
  double initial_t = 0.0;       // <= 0: fitted to the start point
  int dense_limit = 400;        // above this many free variables use sparse LLT
};

struct Solution {
  std::vector<double> x;
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::kIterationLimit;
  // max(duality gap m/t, Newton decrement / t) at the returned point.
  double kkt_residual = kInf;
  // Multiplier estimates 1/(t * -g_i), one per program constraint.
  std::vector<double> duals;
  int iterations = 0;
  int phase1_iterations = 0;
};

// Log-barrier interior method with damped Newton steps. `start` need not be
// feasible; a single-slack phase 1 is run when it is not strictly interior.
Solution solve(const Program& program, std::span<const double> start,
               const SolverOptions& options = {});

struct KktReport {
  double primal_violation = 0.0;
  double dual_violation = 0.0;
  double complementarity = 0.0;
};

// Residuals at `point`. Without `duals`, multipliers of near-active
// constraints and bounds are estimated by clamped least squares.
KktReport check_kkt(const Program& program, std::span<const double> point,
                    std::span<const double> duals = {});

}  // namespace rsma_iov::convex
