#include "rsma_iov/convex.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "rsma_iov/errors.hpp"

namespace rsma_iov::convex {

double AffineForm::eval(std::span<const double> x) const {
  double v = constant;
  for (std::size_t i = 0; i < index.size(); ++i) v += coef[i] * x[index[i]];
  return v;
}

double Constraint::value(std::span<const double> x) const {
  switch (kind) {
    case ConstraintKind::kLinear:
      return affine.eval(x);
    case ConstraintKind::kQuadratic: {
      double v = affine.eval(x);
      for (const auto& sq : squares) {
        const double r = sq.eval(x);
        v += r * r;
      }
      return v;
    }
    case ConstraintKind::kPowerCone:
      return std::exp2(x[exponent_var]) - x[bound_var];
  }
  return 0.0;
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Program

void Program::check_var(int var) const {
  if (var < 0 || var >= num_variables()) {
    throw Error(ErrorKind::kIndex, "unknown variable " + std::to_string(var));
  }
}

int Program::add_variable(std::string name, double lower, double upper) {
  if (lower > upper) {
    throw Error(ErrorKind::kInvalidConfig, "variable " + name + " has lower > upper");
  }
  variables_.push_back(Variable{std::move(name), lower, upper, false, 0.0});
  return num_variables() - 1;
}

int Program::add_block(const std::string& name, int count, double lower,
                       double upper) {
  const int first = num_variables();
  for (int i = 0; i < count; ++i) {
    add_variable(name + "[" + std::to_string(i) + "]", lower, upper);
  }
  return first;
}

void Program::fix(int var, double value) {
  check_var(var);
  variables_[var].fixed = true;
  variables_[var].fixed_value = value;
}

void Program::set_bounds(int var, double lower, double upper) {
  check_var(var);
  variables_[var].lower = lower;
  variables_[var].upper = upper;
}

void Program::add_linear(AffineForm f, std::string label) {
  for (int v : f.index) check_var(v);
  Constraint c;
  c.kind = ConstraintKind::kLinear;
  c.affine = std::move(f);
  c.label = std::move(label);
  constraints_.push_back(std::move(c));
}

void Program::add_quadratic(std::vector<AffineForm> squares, AffineForm f,
                            std::string label) {
  for (int v : f.index) check_var(v);
  for (const auto& sq : squares)
    for (int v : sq.index) check_var(v);
  Constraint c;
  c.kind = ConstraintKind::kQuadratic;
  c.affine = std::move(f);
  c.squares = std::move(squares);
  c.label = std::move(label);
  constraints_.push_back(std::move(c));
}

void Program::add_power_cone(int exponent_var, int bound_var, std::string label) {
  check_var(exponent_var);
  check_var(bound_var);
  Constraint c;
  c.kind = ConstraintKind::kPowerCone;
  c.exponent_var = exponent_var;
  c.bound_var = bound_var;
  c.label = std::move(label);
  constraints_.push_back(std::move(c));
}

double Program::objective(std::span<const double> x) const {
  double v = objective_.eval(x);
  for (const auto& sq : objective_squares_) {
    const double r = sq.eval(x);
    v += r * r;
  }
  return v;
}

double Program::max_violation(std::span<const double> x) const {
  double worst = 0.0;
  for (const auto& c : constraints_) worst = std::max(worst, c.value(x));
  for (int i = 0; i < num_variables(); ++i) {
    const auto& v = variables_[i];
    if (v.fixed) {
      worst = std::max(worst, std::abs(x[i] - v.fixed_value));
    } else {
      worst = std::max({worst, v.lower - x[i], x[i] - v.upper});
    }
  }
  return worst;
}

namespace {

void dump_affine(std::ostringstream& os, const AffineForm& f) {
  for (std::size_t i = 0; i < f.index.size(); ++i) {
    os << (i == 0 ? "" : " ") << f.coef[i] << "*x" << f.index[i];
  }
  os << " + " << f.constant;
}

const char* kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kLinear: return "linear";
    case ConstraintKind::kQuadratic: return "quadratic";
    case ConstraintKind::kPowerCone: return "power-cone";
  }
  return "?";
}

}  // namespace

std::string Program::dump() const {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < num_variables(); ++i) {
    const auto& v = variables_[i];
    os << "var x" << i << " " << v.name << " [" << v.lower << ", " << v.upper
       << "]";
    if (v.fixed) os << " fixed=" << v.fixed_value;
    os << "\n";
  }
  os << "objective ";
  dump_affine(os, objective_);
  for (const auto& sq : objective_squares_) {
    os << " + (";
    dump_affine(os, sq);
    os << ")^2";
  }
  os << "\n";
  for (const auto& c : constraints_) {
    os << "con " << kind_name(c.kind) << " " << c.label << ": ";
    if (c.kind == ConstraintKind::kPowerCone) {
      os << "2^x" << c.exponent_var << " <= x" << c.bound_var;
    } else {
      for (const auto& sq : c.squares) {
        os << "(";
        dump_affine(os, sq);
        os << ")^2 + ";
      }
      dump_affine(os, c.affine);
      os << " <= 0";
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Solver internals

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kCenterTol = 1e-8;

struct LocalSquare {
  std::vector<int> loc;
  std::vector<double> coef;
  double constant = 0.0;
};

// A constraint or objective term expressed over the reduced (free) variables.
struct Compiled {
  ConstraintKind kind = ConstraintKind::kLinear;
  std::vector<int> support;
  std::vector<double> lin;
  double constant = 0.0;
  std::vector<LocalSquare> squares;
  int loc_exp = -1;
  double exp_fixed = 0.0;
  std::vector<int> hpos;  // lower-triangular local pairs -> Hessian storage
  int source = -1;        // program constraint index, -1 for bounds
};

class Reduction {
 public:
  explicit Reduction(const Program& program) : program_(program) {
    const auto& vars = program.variables();
    map_.assign(vars.size(), -1);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (!vars[i].fixed) {
        map_[i] = static_cast<int>(free_.size());
        free_.push_back(static_cast<int>(i));
      }
    }
  }

  int free_count() const { return static_cast<int>(free_.size()); }
  int reduced(int var) const { return map_[var]; }
  int full(int r) const { return free_[r]; }
  double fixed_value(int var) const {
    return program_.variables()[var].fixed_value;
  }

  // Builds the reduced representation; `slack` >= 0 appends -x[slack].
  Compiled compile(ConstraintKind kind, const AffineForm& affine,
                   const std::vector<AffineForm>& squares, int exponent_var,
                   int bound_var, int slack) const {
    std::map<int, double> lin;
    Compiled c;
    c.kind = kind;
    c.constant = affine.constant;
    for (std::size_t i = 0; i < affine.index.size(); ++i) {
      const int r = map_[affine.index[i]];
      if (r >= 0) {
        lin[r] += affine.coef[i];
      } else {
        c.constant += affine.coef[i] * fixed_value(affine.index[i]);
      }
    }
    std::vector<std::map<int, double>> sq_terms(squares.size());
    std::vector<double> sq_const(squares.size(), 0.0);
    for (std::size_t j = 0; j < squares.size(); ++j) {
      sq_const[j] = squares[j].constant;
      for (std::size_t i = 0; i < squares[j].index.size(); ++i) {
        const int r = map_[squares[j].index[i]];
        if (r >= 0) {
          sq_terms[j][r] += squares[j].coef[i];
        } else {
          sq_const[j] += squares[j].coef[i] * fixed_value(squares[j].index[i]);
        }
      }
    }
    int exp_r = -1;
    if (kind == ConstraintKind::kPowerCone) {
      exp_r = map_[exponent_var];
      if (exp_r < 0) c.exp_fixed = fixed_value(exponent_var);
      const int br = map_[bound_var];
      if (br >= 0) {
        lin[br] += -1.0;
      } else {
        c.constant -= fixed_value(bound_var);
      }
    }
    if (slack >= 0) lin[slack] += -1.0;

    std::vector<int> support;
    for (const auto& [r, v] : lin) support.push_back(r);
    for (const auto& terms : sq_terms)
      for (const auto& [r, v] : terms) support.push_back(r);
    if (exp_r >= 0) support.push_back(exp_r);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    auto local = [&](int r) {
      return static_cast<int>(
          std::lower_bound(support.begin(), support.end(), r) - support.begin());
    };
    c.support = support;
    c.lin.assign(support.size(), 0.0);
    for (const auto& [r, v] : lin) c.lin[local(r)] += v;
    for (std::size_t j = 0; j < squares.size(); ++j) {
      LocalSquare ls;
      ls.constant = sq_const[j];
      for (const auto& [r, v] : sq_terms[j]) {
        ls.loc.push_back(local(r));
        ls.coef.push_back(v);
      }
      c.squares.push_back(std::move(ls));
    }
    if (exp_r >= 0) c.loc_exp = local(exp_r);
    return c;
  }

 private:
  const Program& program_;
  std::vector<int> map_;
  std::vector<int> free_;
};

double eval_compiled(const Compiled& c, const Eigen::VectorXd& x) {
  double v = c.constant;
  for (std::size_t i = 0; i < c.support.size(); ++i) v += c.lin[i] * x[c.support[i]];
  for (const auto& sq : c.squares) {
    double r = sq.constant;
    for (std::size_t i = 0; i < sq.loc.size(); ++i) r += sq.coef[i] * x[c.support[sq.loc[i]]];
    v += r * r;
  }
  if (c.kind == ConstraintKind::kPowerCone) {
    v += std::exp2(c.loc_exp >= 0 ? x[c.support[c.loc_exp]] : c.exp_fixed);
  }
  return v;
}

// Local gradient and (optionally) local curvature of a compiled term.
void local_derivatives(const Compiled& c, const Eigen::VectorXd& x,
                       Eigen::VectorXd& grad, double& exp_curv) {
  const int s = static_cast<int>(c.support.size());
  grad.resize(s);
  for (int i = 0; i < s; ++i) grad[i] = c.lin[i];
  for (const auto& sq : c.squares) {
    double r = sq.constant;
    for (std::size_t i = 0; i < sq.loc.size(); ++i) r += sq.coef[i] * x[c.support[sq.loc[i]]];
    for (std::size_t i = 0; i < sq.loc.size(); ++i) grad[sq.loc[i]] += 2.0 * r * sq.coef[i];
  }
  exp_curv = 0.0;
  if (c.kind == ConstraintKind::kPowerCone && c.loc_exp >= 0) {
    const double e = std::exp2(x[c.support[c.loc_exp]]);
    grad[c.loc_exp] += kLn2 * e;
    exp_curv = kLn2 * kLn2 * e;
  }
}

inline int tri(int a, int b) { return a >= b ? a * (a + 1) / 2 + b : b * (b + 1) / 2 + a; }

class HessianStore {
 public:
  HessianStore(int n, bool dense, std::vector<Compiled*> terms) : n_(n), dense_(dense) {
    if (dense_) {
      values_.assign(static_cast<std::size_t>(n) * n, 0.0);
      for (Compiled* c : terms) {
        const int s = static_cast<int>(c->support.size());
        c->hpos.resize(static_cast<std::size_t>(s) * (s + 1) / 2);
        for (int a = 0; a < s; ++a)
          for (int b = 0; b <= a; ++b)
            c->hpos[tri(a, b)] = c->support[b] * n + c->support[a];
      }
      return;
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 0.0);
    for (Compiled* c : terms) {
      const int s = static_cast<int>(c->support.size());
      for (int a = 0; a < s; ++a)
        for (int b = 0; b <= a; ++b) trip.emplace_back(c->support[a], c->support[b], 0.0);
    }
    sparse_.resize(n, n);
    sparse_.setFromTriplets(trip.begin(), trip.end());
    sparse_.makeCompressed();
    const int* outer = sparse_.outerIndexPtr();
    const int* inner = sparse_.innerIndexPtr();
    auto position = [&](int row, int col) {
      const int* begin = inner + outer[col];
      const int* end = inner + outer[col + 1];
      return static_cast<int>(std::lower_bound(begin, end, row) - inner);
    };
    diag_pos_.resize(n);
    for (int i = 0; i < n; ++i) diag_pos_[i] = position(i, i);
    for (Compiled* c : terms) {
      const int s = static_cast<int>(c->support.size());
      c->hpos.resize(static_cast<std::size_t>(s) * (s + 1) / 2);
      for (int a = 0; a < s; ++a)
        for (int b = 0; b <= a; ++b)
          c->hpos[tri(a, b)] = position(c->support[a], c->support[b]);
    }
    llt_.analyzePattern(sparse_);
  }

  double* data() { return dense_ ? values_.data() : sparse_.valuePtr(); }
  void clear() {
    if (dense_) {
      std::fill(values_.begin(), values_.end(), 0.0);
    } else {
      std::fill(sparse_.valuePtr(), sparse_.valuePtr() + sparse_.nonZeros(), 0.0);
    }
  }

  // Solves H d = rhs, adding a growing diagonal shift on failure.
  bool solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& d) {
    double shift = 0.0;
    double scale = 0.0;
    for (int i = 0; i < n_; ++i) scale = std::max(scale, std::abs(diag(i)));
    if (scale == 0.0) scale = 1.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (shift > 0.0) add_diag(shift - (attempt > 1 ? shift / 10.0 : 0.0));
      if (dense_) {
        Eigen::Map<Eigen::MatrixXd> H(values_.data(), n_, n_);
        Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(H);
        if (llt.info() == Eigen::Success) {
          d = llt.solve(rhs);
          if (d.allFinite()) return true;
        }
      } else {
        llt_.factorize(sparse_);
        if (llt_.info() == Eigen::Success) {
          d = llt_.solve(rhs);
          if (d.allFinite()) return true;
        }
      }
      shift = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
    }
    return false;
  }

 private:
  double diag(int i) const {
    return dense_ ? values_[static_cast<std::size_t>(i) * n_ + i]
                  : sparse_.valuePtr()[diag_pos_[i]];
  }
  void add_diag(double v) {
    for (int i = 0; i < n_; ++i) {
      if (dense_) {
        values_[static_cast<std::size_t>(i) * n_ + i] += v;
      } else {
        sparse_.valuePtr()[diag_pos_[i]] += v;
      }
    }
  }

  int n_;
  bool dense_;
  std::vector<double> values_;
  Eigen::SparseMatrix<double> sparse_;
  std::vector<int> diag_pos_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt_;
};

// Barrier subproblem: minimize t * (c^T x + sum squares^2) - sum log(-g_i).
class Barrier {
 public:
  Barrier(int n, Eigen::VectorXd c, std::vector<Compiled> objective_squares,
          std::vector<Compiled> constraints, bool dense)
      : n_(n),
        c_(std::move(c)),
        obj_(std::move(objective_squares)),
        cons_(std::move(constraints)),
        store_(n, dense, collect()) {}

  int n() const { return n_; }
  int m() const { return static_cast<int>(cons_.size()); }
  const std::vector<Compiled>& constraints() const { return cons_; }

  double objective(const Eigen::VectorXd& x) const {
    double v = c_.dot(x);
    for (const auto& sq : obj_) v += eval_compiled(sq, x);
    return v;
  }

  // Returns +inf when x is not strictly interior.
  double barrier_value(const Eigen::VectorXd& x, double t) const {
    double v = t * objective(x);
    for (const auto& g : cons_) {
      const double gv = eval_compiled(g, x);
      if (!(gv < 0.0)) return kInf;
      v -= std::log(-gv);
    }
    return v;
  }

  double max_constraint(const Eigen::VectorXd& x) const {
    double worst = -kInf;
    for (const auto& g : cons_) worst = std::max(worst, eval_compiled(g, x));
    return worst;
  }

  // Barrier weight that best balances objective and barrier gradients at x,
  // i.e. argmin_t |t grad f0 + grad phi|.
  double fit_weight(const Eigen::VectorXd& x) const {
    Eigen::VectorXd c = c_;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd g;
    double curv = 0.0;
    for (const auto& sq : obj_) {
      local_derivatives(sq, x, g, curv);
      for (std::size_t i = 0; i < sq.support.size(); ++i) c[sq.support[i]] += g[i];
    }
    for (const auto& con : cons_) {
      const double v = eval_compiled(con, x);
      local_derivatives(con, x, g, curv);
      for (std::size_t i = 0; i < con.support.size(); ++i) d[con.support[i]] += g[i] / (-v);
    }
    const double cc = c.squaredNorm();
    if (!(cc > 0.0)) return 1.0;
    return -c.dot(d) / cc;
  }

  // Newton direction; returns the squared Newton decrement.
  bool newton(const Eigen::VectorXd& x, double t, Eigen::VectorXd& dir,
              Eigen::VectorXd& grad, double& decrement2) {
    store_.clear();
    double* h = store_.data();
    grad = t * c_;
    Eigen::VectorXd g;
    double curv = 0.0;
    for (const auto& sq : obj_) {
      local_derivatives(sq, x, g, curv);
      for (std::size_t i = 0; i < sq.support.size(); ++i) grad[sq.support[i]] += t * g[i];
      add_square_curvature(sq, 2.0 * t, h);
    }
    for (const auto& con : cons_) {
      const double v = eval_compiled(con, x);
      if (!(v < 0.0)) return false;
      local_derivatives(con, x, g, curv);
      const double inv = 1.0 / (-v);
      const int s = static_cast<int>(con.support.size());
      for (int a = 0; a < s; ++a) grad[con.support[a]] += g[a] * inv;
      const double inv2 = inv * inv;
      for (int a = 0; a < s; ++a) {
        const double ga = g[a] * inv2;
        const int base = a * (a + 1) / 2;
        for (int b = 0; b <= a; ++b) h[con.hpos[base + b]] += ga * g[b];
      }
      add_square_curvature(con, 2.0 * inv, h);
      if (con.loc_exp >= 0 && curv != 0.0) h[con.hpos[tri(con.loc_exp, con.loc_exp)]] += curv * inv;
    }
    if (!store_.solve(-grad, dir)) return false;
    decrement2 = -grad.dot(dir);
    return std::isfinite(decrement2);
  }

 private:
  std::vector<Compiled*> collect() {
    std::vector<Compiled*> out;
    for (auto& c : obj_) out.push_back(&c);
    for (auto& c : cons_) out.push_back(&c);
    return out;
  }

  static void add_square_curvature(const Compiled& c, double w, double* h) {
    for (const auto& sq : c.squares) {
      for (std::size_t i = 0; i < sq.loc.size(); ++i) {
        for (std::size_t j = 0; j < sq.loc.size(); ++j) {
          if (sq.loc[j] > sq.loc[i]) continue;
          h[c.hpos[tri(sq.loc[i], sq.loc[j])]] += w * sq.coef[i] * sq.coef[j];
        }
      }
    }
  }

  int n_;
  Eigen::VectorXd c_;
  std::vector<Compiled> obj_;
  std::vector<Compiled> cons_;
  HessianStore store_;
};

struct CenteringResult {
  int steps = 0;
  double decrement2 = kInf;
  bool stalled = false;
  bool failed = false;
};

// Damped Newton minimization of the barrier function at fixed t. `stop`
// is polled after every accepted step.
template <typename Stop>
CenteringResult center(Barrier& barrier, Eigen::VectorXd& x, double t,
                       int budget, Stop&& stop) {
  CenteringResult out;
  Eigen::VectorXd dir;
  Eigen::VectorXd grad;
  double fx = barrier.barrier_value(x, t);
  int flat = 0;
  while (out.steps < budget) {
    double dec2 = 0.0;
    if (!barrier.newton(x, t, dir, grad, dec2)) {
      out.failed = true;
      return out;
    }
    out.decrement2 = dec2;
    if (dec2 / 2.0 <= kCenterTol) return out;
    // Rounding floor: the decrement stopped shrinking.
    if (dec2 < 1e-4 && ++flat > 4) {
      out.stalled = true;
      return out;
    }
    double step = 1.0;
    Eigen::VectorXd trial;
    double ft = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = x + step * dir;
      ft = barrier.barrier_value(trial, t);
      // Near the center the decrease is below the rounding noise of the
      // barrier value, so full steps there are accepted on feasibility alone.
      const bool quadratic_region = dec2 < 1e-4 && step == 1.0;
      if (std::isfinite(ft) &&
          (quadratic_region || ft <= fx - 0.25 * step * dec2 + 1e-13 * std::abs(fx))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++out.steps;
    if (!accepted) {
      out.stalled = true;
      return out;
    }
    x = std::move(trial);
    fx = ft;
    if (stop(x)) return out;
  }
  return out;
}

double interior_margin(double bound, double lower, double upper) {
  double margin = 1e-9 * (1.0 + std::abs(bound));
  if (std::isfinite(lower) && std::isfinite(upper)) margin = std::min(margin, 0.25 * (upper - lower));
  return margin;
}

}  // namespace

Solution solve(const Program& program, std::span<const double> start,
               const SolverOptions& options) {
  const auto& vars = program.variables();
  if (start.size() != vars.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "start point has wrong dimension");
  }
  Reduction red(program);
  const int n = red.free_count();

  // Reduced starting point, pushed strictly inside the variable bounds.
  Eigen::VectorXd x(n);
  for (int r = 0; r < n; ++r) {
    const auto& v = vars[red.full(r)];
    double xi = start[red.full(r)];
    if (std::isfinite(v.lower)) xi = std::max(xi, v.lower + interior_margin(v.lower, v.lower, v.upper));
    if (std::isfinite(v.upper)) xi = std::min(xi, v.upper - interior_margin(v.upper, v.lower, v.upper));
    x[r] = xi;
  }

  auto make_bounds = [&](std::vector<Compiled>& out) {
    for (int r = 0; r < n; ++r) {
      const auto& v = vars[red.full(r)];
      if (std::isfinite(v.lower)) {
        Compiled c;
        c.support = {r};
        c.lin = {-1.0};
        c.constant = v.lower;
        out.push_back(std::move(c));
      }
      if (std::isfinite(v.upper)) {
        Compiled c;
        c.support = {r};
        c.lin = {1.0};
        c.constant = -v.upper;
        out.push_back(std::move(c));
      }
    }
  };
  auto make_general = [&](std::vector<Compiled>& out, int slack) {
    const auto& cons = program.constraints();
    for (std::size_t i = 0; i < cons.size(); ++i) {
      Compiled c = red.compile(cons[i].kind, cons[i].affine, cons[i].squares,
                               cons[i].exponent_var, cons[i].bound_var, slack);
      c.source = static_cast<int>(i);
      out.push_back(std::move(c));
    }
  };
  auto make_objective = [&](Eigen::VectorXd& c, std::vector<Compiled>& squares) {
    c = Eigen::VectorXd::Zero(n);
    const auto& f = program.objective_affine();
    for (std::size_t i = 0; i < f.index.size(); ++i) {
      const int r = red.reduced(f.index[i]);
      if (r >= 0) c[r] += f.coef[i];
    }
    for (const auto& sq : program.objective_squares()) {
      squares.push_back(red.compile(ConstraintKind::kQuadratic, AffineForm(), {sq}, -1, -1, -1));
    }
  };

  Solution sol;
  int budget = options.max_iters;
  const bool dense = n + 1 <= options.dense_limit;

  // Phase 1 when the start is not strictly feasible.
  double worst = -kInf;
  {
    std::vector<double> full(start.begin(), start.end());
    for (int r = 0; r < n; ++r) full[red.full(r)] = x[r];
    for (int i = 0; i < program.num_variables(); ++i)
      if (vars[i].fixed) full[i] = vars[i].fixed_value;
    for (const auto& c : program.constraints()) worst = std::max(worst, c.value(full));
  }
  if (!program.constraints().empty() && !(worst < 0.0)) {
    const int slack = n;
    std::vector<Compiled> cons;
    make_general(cons, slack);
    make_bounds(cons);
    {
      Compiled floor;
      floor.support = {slack};
      floor.lin = {-1.0};
      floor.constant = -1.0 - std::abs(worst);
      cons.push_back(std::move(floor));
    }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
    c[slack] = 1.0;
    Barrier phase1(n + 1, std::move(c), {}, std::move(cons), n + 1 <= options.dense_limit);
    Eigen::VectorXd xs(n + 1);
    xs.head(n) = x;
    xs[slack] = worst + 1e-3 * (1.0 + std::abs(worst));
    double t = std::clamp(phase1.fit_weight(xs), 1.0 / (1.0 + std::abs(worst)), 1e12);
    bool found = false;
    auto reached = [&](const Eigen::VectorXd& z) { return z[slack] < 0.0; };
    int used = 0;
    while (used < budget) {
      const auto res = center(phase1, xs, t, budget - used, reached);
      used += res.steps;
      if (xs[slack] < 0.0) {
        found = true;
        break;
      }
      if (res.failed || res.stalled) break;
      // Centered with a positive lower bound on the optimal slack.
      if (res.decrement2 / 2.0 <= kCenterTol && xs[slack] - phase1.m() / t > 0.0) break;
      if (phase1.m() / t < 1e-3 * options.feas_tol) break;
      t /= options.barrier_factor;
    }
    sol.phase1_iterations = used;
    budget -= used;
    if (!found) {
      sol.status = used >= options.max_iters ? SolveStatus::kIterationLimit
                                             : SolveStatus::kInfeasible;
      sol.x.assign(start.begin(), start.end());
      for (int r = 0; r < n; ++r) sol.x[red.full(r)] = xs[r];
      for (int i = 0; i < program.num_variables(); ++i)
        if (vars[i].fixed) sol.x[i] = vars[i].fixed_value;
      sol.objective_value = program.objective(sol.x);
      sol.iterations = used;
      return sol;
    }
    x = xs.head(n);
  }

  std::vector<Compiled> cons;
  make_general(cons, -1);
  const int general = static_cast<int>(cons.size());
  make_bounds(cons);
  Eigen::VectorXd c;
  std::vector<Compiled> squares;
  make_objective(c, squares);
  Barrier phase2(n, std::move(c), std::move(squares), std::move(cons), dense);

  const int m = phase2.m();
  double t = options.initial_t;
  // Without a user choice, start where the duality-gap bound m/t matches the
  // objective magnitude.
  if (!(t > 0.0)) t = std::max(1.0, m / (1.0 + std::abs(phase2.objective(x))));
  int used = 0;
  double last_dec2 = kInf;
  bool converged = false;
  while (used < budget) {
    const auto res = center(phase2, x, t, budget - used, [](const Eigen::VectorXd&) { return false; });
    used += res.steps;
    last_dec2 = res.decrement2;
    const bool centered = res.decrement2 / 2.0 <= kCenterTol || res.stalled;
    if (res.failed) break;
    if (centered && (m == 0 || m / t < options.opt_tol)) {
      converged = true;
      break;
    }
    if (!centered) break;
    if (m == 0) {
      converged = true;
      break;
    }
    t /= options.barrier_factor;
  }
  sol.iterations = used + sol.phase1_iterations;

  sol.x.assign(start.begin(), start.end());
  for (int r = 0; r < n; ++r) sol.x[red.full(r)] = x[r];
  for (int i = 0; i < program.num_variables(); ++i)
    if (vars[i].fixed) sol.x[i] = vars[i].fixed_value;
  sol.objective_value = program.objective(sol.x);
  sol.kkt_residual = std::max(m == 0 ? 0.0 : m / t,
                              std::isfinite(last_dec2) ? std::sqrt(std::max(last_dec2, 0.0)) / t : kInf);
  sol.duals.assign(program.constraints().size(), 0.0);
  const auto& compiled = phase2.constraints();
  for (int i = 0; i < general; ++i) {
    const double v = eval_compiled(compiled[i], x);
    sol.duals[compiled[i].source] = 1.0 / (t * (-v));
  }
  const bool feasible = program.max_violation(sol.x) <= options.feas_tol;
  sol.status = converged && feasible ? SolveStatus::kOptimal : SolveStatus::kIterationLimit;
  return sol;
}

// ---------------------------------------------------------------------------
// KKT check

namespace {

// Gradient of a constraint over the full variable vector.
Eigen::VectorXd constraint_gradient(const Constraint& c, std::span<const double> x, int n) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  if (c.kind == ConstraintKind::kPowerCone) {
    g[c.exponent_var] += kLn2 * std::exp2(x[c.exponent_var]);
    g[c.bound_var] -= 1.0;
    return g;
  }
  for (std::size_t i = 0; i < c.affine.index.size(); ++i) g[c.affine.index[i]] += c.affine.coef[i];
  for (const auto& sq : c.squares) {
    const double r = sq.eval(x);
    for (std::size_t i = 0; i < sq.index.size(); ++i) g[sq.index[i]] += 2.0 * r * sq.coef[i];
  }
  return g;
}

}  // namespace

KktReport check_kkt(const Program& program, std::span<const double> point,
                    std::span<const double> duals) {
  const int n = program.num_variables();
  if (static_cast<int>(point.size()) != n) {
    throw Error(ErrorKind::kDimensionMismatch, "point has wrong dimension");
  }
  const auto& cons = program.constraints();
  const auto& vars = program.variables();
  KktReport report;
  report.primal_violation = std::max(0.0, program.max_violation(point));

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
  const auto& f = program.objective_affine();
  for (std::size_t i = 0; i < f.index.size(); ++i) grad[f.index[i]] += f.coef[i];
  for (const auto& sq : program.objective_squares()) {
    const double r = sq.eval(point);
    for (std::size_t i = 0; i < sq.index.size(); ++i) grad[sq.index[i]] += 2.0 * r * sq.coef[i];
  }

  // Columns: constraint gradients (and +/- unit vectors for active bounds).
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> values;
  std::vector<double> given;
  const double active_tol = 1e-6;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const double v = cons[i].value(point);
    if (!duals.empty()) {
      cols.push_back(constraint_gradient(cons[i], point, n));
      values.push_back(v);
      given.push_back(duals[i]);
    } else if (v >= -active_tol * (1.0 + std::abs(v))) {
      cols.push_back(constraint_gradient(cons[i], point, n));
      values.push_back(v);
    }
  }
  const int known = static_cast<int>(given.size());
  for (int i = 0; i < n; ++i) {
    if (vars[i].fixed) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = 1.0;
      cols.push_back(e);
      values.push_back(0.0);
      cols.push_back(-e);
      values.push_back(0.0);
      continue;
    }
    if (std::isfinite(vars[i].lower) && point[i] - vars[i].lower <= active_tol * (1.0 + std::abs(vars[i].lower))) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = -1.0;
      cols.push_back(e);
      values.push_back(vars[i].lower - point[i]);
    }
    if (std::isfinite(vars[i].upper) && vars[i].upper - point[i] <= active_tol * (1.0 + std::abs(vars[i].upper))) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = 1.0;
      cols.push_back(e);
      values.push_back(point[i] - vars[i].upper);
    }
  }

  Eigen::VectorXd residual = grad;
  for (int j = 0; j < known; ++j) residual += given[j] * cols[j];
  const int unknown = static_cast<int>(cols.size()) - known;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(unknown);
  if (unknown > 0) {
    Eigen::MatrixXd J(n, unknown);
    for (int j = 0; j < unknown; ++j) J.col(j) = cols[known + j];
    // Clamped least squares: drop negative multipliers and refit.
    std::vector<int> active(unknown);
    for (int j = 0; j < unknown; ++j) active[j] = j;
    for (int round = 0; round < unknown + 1 && !active.empty(); ++round) {
      Eigen::MatrixXd Ja(n, active.size());
      for (std::size_t j = 0; j < active.size(); ++j) Ja.col(j) = J.col(active[j]);
      const Eigen::VectorXd la = Ja.completeOrthogonalDecomposition().solve(-residual);
      std::vector<int> keep;
      lambda.setZero();
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (la[j] >= 0.0) keep.push_back(active[j]);
        lambda[active[j]] = std::max(la[j], 0.0);
      }
      if (keep.size() == active.size()) break;
      active = keep;
      lambda.setZero();
    }
    residual += J * lambda;
  }
  report.dual_violation = residual.lpNorm<Eigen::Infinity>();
  double comp = 0.0;
  for (int j = 0; j < known; ++j) comp += std::abs(given[j] * values[j]);
  for (int j = 0; j < unknown; ++j) comp += std::abs(lambda[j] * values[known + j]);
  report.complementarity = comp;
  return report;
}

}  // namespace rsma_iov::convex
