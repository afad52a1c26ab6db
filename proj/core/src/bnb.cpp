#include "microtube/bnb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "microtube/errors.hpp"

namespace microtube {

namespace {

struct Node {
  double bound;
  int id;
  Eigen::VectorXd lb, ub;
  QpSolution relax;

  bool operator<(const Node& other) const {
    // std::priority_queue is a max-heap; invert for best-bound-first,
    // break ties by node id for deterministic order.
    if (bound != other.bound) return bound > other.bound;
    return id > other.id;
  }
};

constexpr double kRowTol = 1e-7;

/// A relaxation often leaves a mode binary fractional even though the powers
/// it gates are far from their limits; any assignment keeping its big-M rows
/// satisfied is then optimal, because binaries carry no cost. Returns that
/// assignment, or -1 when the binary genuinely needs branching.
int snap_value(const MiqpProblem& p, const QpSolution& sol, const Eigen::VectorXd& row_vals,
               int b, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
  if (p.lin_cost[b] != 0.0 || p.quad_cost[b] != 0.0) return -1;
  const double xv = sol.x[b];
  const int first = xv >= 0.5 ? 1 : 0;
  for (int a : {first, 1 - first}) {
    if (a < lb[b] - 0.5 || a > ub[b] + 0.5) continue;
    bool ok = true;
    for (SparseMat::InnerIterator it(p.ineq_mat, b); it; ++it) {
      if (row_vals[it.row()] + it.value() * (a - xv) > p.ineq_rhs[it.row()] + kRowTol) {
        ok = false;
        break;
      }
    }
    if (ok) return a;
  }
  return -1;
}

int most_fractional(const MiqpProblem& p, const QpSolution& sol,
                    const Eigen::VectorXd& row_vals, const Eigen::VectorXd& lb,
                    const Eigen::VectorXd& ub, double int_tol) {
  int best = -1;
  double best_dist = int_tol;
  for (int b : p.binary_cols) {
    if (lb[b] == ub[b]) continue;  // fixed by an ancestor
    const double v = sol.x[b];
    const double frac = std::abs(v - std::round(v));
    if (frac <= best_dist) continue;
    if (snap_value(p, sol, row_vals, b, lb, ub) >= 0) continue;
    best_dist = frac;
    best = b;
  }
  return best;
}

/// Turn a relaxation into an integral candidate when every binary is either
/// already integral or snappable. The objective is unchanged: only cost-free
/// binary columns move.
bool resolve_binaries(const MiqpProblem& p, const QpSolution& sol,
                      const Eigen::VectorXd& row_vals, const Eigen::VectorXd& lb,
                      const Eigen::VectorXd& ub, double int_tol, QpSolution& out) {
  out = sol;
  for (int b : p.binary_cols) {
    const double v = sol.x[b];
    if (std::abs(v - std::round(v)) <= int_tol) {
      out.x[b] = std::round(v);
      continue;
    }
    const int a = snap_value(p, sol, row_vals, b, lb, ub);
    if (a < 0) return false;
    out.x[b] = a;
  }
  return true;
}

}  // namespace

BnbReport solve_miqp(const MiqpProblem& problem, const BnbSettings& settings,
                     QpSolver* solver) {
  QpSolver local(settings.qp);
  QpSolver& qp = solver ? *solver : local;
  qp.setup(problem);

  BnbReport report;
  int next_id = 0;

  QpSolution root = qp.solve();
  report.node_log.push_back({next_id, -1, root.objective});
  ++next_id;
  ++report.nodes_explored;
  if (root.status == SolveStatus::Infeasible) {
    report.incumbent = std::move(root);
    report.status = SolveStatus::Infeasible;
    return report;
  }

  if (problem.binary_cols.empty()) {
    report.best_bound = root.objective;
    report.incumbent = std::move(root);
    report.status = report.incumbent.status;
    report.gap = 0.0;
    return report;
  }

  const double int_tol = settings.int_tol;
  bool have_incumbent = false;
  QpSolution incumbent;
  std::set<std::vector<int>> tried_roundings;

  auto try_rounding = [&](const QpSolution& relax) {
    std::vector<int> assign;
    assign.reserve(problem.binary_cols.size());
    for (int b : problem.binary_cols) assign.push_back(relax.x[b] >= 0.5 ? 1 : 0);
    if (!tried_roundings.insert(assign).second) return;
    Eigen::VectorXd lb = problem.lb, ub = problem.ub;
    for (std::size_t k = 0; k < assign.size(); ++k) {
      lb[problem.binary_cols[k]] = ub[problem.binary_cols[k]] = assign[k];
    }
    WarmStart ws;
    ws.x = relax.x;
    ws.y.resize(relax.dual_eq.size() + relax.dual_ineq.size() + relax.dual_bounds.size());
    ws.y << relax.dual_eq, relax.dual_ineq, relax.dual_bounds;
    QpSolution fixed = qp.solve_boxed(lb, ub, &ws);
    if (fixed.status == SolveStatus::Optimal &&
        (!have_incumbent || fixed.objective < incumbent.objective)) {
      incumbent = std::move(fixed);
      for (int b : problem.binary_cols) incumbent.x[b] = std::round(incumbent.x[b]);
      have_incumbent = true;
    }
  };

  {
    const Eigen::VectorXd row_vals = problem.ineq_mat * root.x;
    QpSolution cand;
    if (root.status == SolveStatus::Optimal &&
        resolve_binaries(problem, root, row_vals, problem.lb, problem.ub, int_tol, cand)) {
      report.best_bound = root.objective;
      report.incumbent = std::move(cand);
      report.status = SolveStatus::Optimal;
      report.gap = 0.0;
      return report;
    }
  }

  try_rounding(root);

  std::priority_queue<Node> open;
  {
    Node n;
    // an unconverged root cannot prune anything
    n.bound = root.status == SolveStatus::Optimal
                  ? root.objective
                  : -std::numeric_limits<double>::infinity();
    n.id = 0;
    n.lb = problem.lb;
    n.ub = problem.ub;
    n.relax = std::move(root);
    open.push(std::move(n));
  }

  auto rel_gap = [](double inc, double bound) {
    return (inc - bound) / std::max(1.0, std::abs(inc));
  };

  while (!open.empty()) {
    if (have_incumbent && rel_gap(incumbent.objective, open.top().bound) <= settings.gap_tol) {
      report.best_bound = open.top().bound;
      break;
    }
    if (report.nodes_explored >= settings.node_limit) {
      report.hit_node_limit = true;
      report.best_bound = open.top().bound;
      break;
    }

    Node node = open.top();
    open.pop();

    if (have_incumbent && node.bound >= incumbent.objective) {
      report.best_bound = node.bound;
      break;  // best-first: nothing better remains
    }

    const Eigen::VectorXd node_rows = problem.ineq_mat * node.relax.x;
    const int branch_col =
        most_fractional(problem, node.relax, node_rows, node.lb, node.ub, int_tol);
    if (branch_col < 0) {
      QpSolution cand;
      if (resolve_binaries(problem, node.relax, node_rows, node.lb, node.ub, int_tol, cand) &&
          (!have_incumbent || cand.objective < incumbent.objective)) {
        incumbent = std::move(cand);
        have_incumbent = true;
      }
      continue;
    }

    WarmStart ws;
    ws.x = node.relax.x;
    ws.y.resize(node.relax.dual_eq.size() + node.relax.dual_ineq.size() +
                node.relax.dual_bounds.size());
    ws.y << node.relax.dual_eq, node.relax.dual_ineq, node.relax.dual_bounds;

    for (int val : {0, 1}) {
      Node child;
      child.lb = node.lb;
      child.ub = node.ub;
      child.lb[branch_col] = child.ub[branch_col] = val;
      QpSolution sol = qp.solve_boxed(child.lb, child.ub, &ws);
      ++report.nodes_explored;
      const int id = next_id++;
      // only a converged relaxation yields a sound bound or candidate
      if (sol.status != SolveStatus::Optimal) continue;
      report.node_log.push_back({id, node.id, sol.objective});
      if (have_incumbent &&
          rel_gap(incumbent.objective, sol.objective) <= settings.gap_tol) {
        continue;  // pruned by bound
      }
      {
        const Eigen::VectorXd sol_rows = problem.ineq_mat * sol.x;
        QpSolution cand;
        if (resolve_binaries(problem, sol, sol_rows, child.lb, child.ub, int_tol, cand)) {
          if (!have_incumbent || cand.objective < incumbent.objective) {
            incumbent = std::move(cand);
            have_incumbent = true;
          }
          continue;
        }
      }
      if (report.nodes_explored % 16 == 0) try_rounding(sol);
      child.bound = sol.objective;
      child.id = id;
      child.relax = std::move(sol);
      open.push(std::move(child));
    }
  }

  if (!have_incumbent) {
    report.status = report.hit_node_limit ? SolveStatus::IterationLimit
                                          : SolveStatus::Infeasible;
    return report;
  }

  if (open.empty() && !report.hit_node_limit) report.best_bound = incumbent.objective;
  if (report.best_bound > incumbent.objective) report.best_bound = incumbent.objective;
  report.gap = rel_gap(incumbent.objective, report.best_bound);
  report.incumbent = std::move(incumbent);
  report.status = (report.hit_node_limit && report.gap > settings.gap_tol)
                      ? SolveStatus::IterationLimit
                      : SolveStatus::Optimal;
  return report;
}

QpSolution enumerate_oracle(const MiqpProblem& problem, const QpSettings& settings) {
  const int k = static_cast<int>(problem.binary_cols.size());
  if (k > 12) throw DomainError("enumerate_oracle supports at most 12 binaries");

  QpSolver qp(settings);
  qp.setup(problem);

  if (k == 0) return qp.solve();

  QpSolution best;
  best.status = SolveStatus::Infeasible;
  bool have_best = false;
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    Eigen::VectorXd lb = problem.lb, ub = problem.ub;
    for (int j = 0; j < k; ++j) {
      const double v = (mask >> j) & 1u;
      lb[problem.binary_cols[j]] = ub[problem.binary_cols[j]] = v;
    }
    QpSolution sol = qp.solve_boxed(lb, ub);
    if (sol.status != SolveStatus::Optimal) continue;
    if (!have_best || sol.objective < best.objective) {
      best = std::move(sol);
      have_best = true;
    }
  }
  return best;
}

}  // namespace microtube
