#pragma once

// Convex QP engine behind the MIQP stack:
//
//   minimize    1/2 x'Px + q'x
//   subject to  A_eq x = b,  A_ineq x <= h,  lb <= x <= ub
//
// solved by an infeasible-start primal-dual interior-point iteration
// (Mehrotra predictor-corrector) on the quasi-definite KKT system
//
//   [ P + D_box + reg   A' ] [dx]   [...]
//   [ A                -D_s ] [dv] = [...]
//
// where A stacks the equality and inequality rows and only the diagonal
// blocks change between iterations, so the symbolic factorization is
// computed once per problem structure and reused. Variables fixed by
// branch-and-bound (lb == ub) are pinned by a large diagonal weight, which
// keeps the KKT pattern identical across all nodes of a search tree.
//
// Primal infeasibility is certified by a Farkas ray assembled from the
// diverging dual iterates.
//
// A single QpSolver owns private workspace and is not concurrently reusable;
// distinct instances may run in parallel.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>

#include "microtube/problem.hpp"

namespace microtube {

enum class SolveStatus { Optimal, Infeasible, IterationLimit };

const char* solve_status_name(SolveStatus s);

struct QpSettings {
  double eps_abs = 1e-8;     // residual and complementarity gap target
  double eps_rel = 1e-8;
  double eps_infeas = 1e-7;  // Farkas certificate tolerance
  int max_iters = 200;       // interior-point iterations
  double reg = 1e-8;         // static KKT regularization
  double step_frac = 0.995;  // fraction-to-boundary step scaling
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd dual_eq;
  Eigen::VectorXd dual_ineq;
  Eigen::VectorXd dual_bounds;  // positive at an active upper bound
  double objective = 0.0;
  SolveStatus status = SolveStatus::IterationLimit;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  // Certificate of primal infeasibility: a dual ray over the stacked rows
  // (equalities, inequalities, bounds) with negative support.
  Eigen::VectorXd infeasibility_ray;
};

struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // stacked duals: equality rows, inequality rows, bound rows
};

class QpSolver {
public:
  explicit QpSolver(QpSettings settings = {});

  /// Bind the solver to a problem. If the problem's matrices are value-equal
  /// to the ones already bound, the symbolic work is reused and only the
  /// cost/bound vectors are refreshed.
  void setup(const MiqpProblem& problem);

  bool is_setup() const { return n_ > 0; }
  int num_vars() const { return n_; }

  /// Solve with the bound problem's box. Binary columns keep whatever
  /// bounds the problem carries ([0,1] unless fixed).
  QpSolution solve(const WarmStart* warm = nullptr);

  /// Solve with an overridden variable box (branch-and-bound nodes).
  QpSolution solve_boxed(const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                         const WarmStart* warm = nullptr);

  using TraceSink = std::function<void(int iter, double prim_res, double dual_res)>;
  void set_trace_sink(TraceSink sink) { trace_ = std::move(sink); }

private:
  void build_kkt_pattern();
  void refresh_vectors(const MiqpProblem& p);
  QpSolution run(const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                 const WarmStart* warm);
  bool farkas_certified(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& zl, const Eigen::VectorXd& zu,
                        const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                        const Eigen::VectorXd& ineq_rhs, Eigen::VectorXd& ray) const;

  QpSettings settings_;
  TraceSink trace_;

  // A big-M row whose binary is pinned can force its other columns to zero
  // (e.g. charge <= c_max (1-u) with u = 1). Pinning those columns too keeps
  // the inequality interior nonempty, which the interior-point needs.
  struct BigMRow {
    int binary_col;
    int row;
    double binary_coef;
    std::vector<std::pair<int, double>> others;  // (column, coefficient)
  };

  // bound problem
  int n_ = 0, m_eq_ = 0, m_ineq_ = 0, m_ = 0;
  SparseMat A_;  // stacked [A_eq; A_ineq], compressed
  Eigen::VectorXd P_diag_, q_;
  Eigen::VectorXd eq_rhs_, ineq_rhs_;
  Eigen::VectorXd lb0_, ub0_;
  double cost_offset_ = 0.0;
  std::vector<BigMRow> bigm_rows_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> ineq_by_row_;

  // cache keys for symbolic reuse
  Eigen::VectorXd cached_quad_;
  Eigen::VectorXd cached_eq_vals_, cached_ineq_vals_;
  Eigen::VectorXi cached_dims_;

  // KKT matrix with fixed pattern; only diagonal values change per iteration
  SparseMat kkt_mat_;
  std::vector<int> diag_pos_;  // value index of each diagonal entry, size n_ + m_
  Eigen::SimplicialLDLT<SparseMat> kkt_;
  bool pattern_ready_ = false;
};

/// Convenience one-shot relaxation solve.
QpSolution solve_qp(const MiqpProblem& problem, const WarmStart* warm = nullptr,
                    const QpSettings& settings = {});

}  // namespace microtube
