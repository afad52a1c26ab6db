#pragma once

// Best-first branch-and-bound over the binary columns of a MiqpProblem,
// with an exhaustive-enumeration oracle for testing. Branching fixes a
// binary through its box bounds, so the relaxation factorization is shared
// across the whole tree.

#include <vector>

#include "microtube/problem.hpp"
#include "microtube/solver.hpp"

namespace microtube {

struct BnbSettings {
  double gap_tol = 1e-6;
  double int_tol = 1e-6;
  int node_limit = 5000;
  QpSettings qp;
};

struct BnbNodeLog {
  int node_id;
  int parent_id;    // -1 at the root
  double bound;     // relaxation objective at the node
};

struct BnbReport {
  QpSolution incumbent;
  SolveStatus status = SolveStatus::Infeasible;
  int nodes_explored = 0;
  double best_bound = 0.0;
  double gap = 0.0;
  bool hit_node_limit = false;
  std::vector<BnbNodeLog> node_log;
};

/// Solve the MIQP. A caller-owned solver may be passed to reuse its cached
/// factorization across calls on structurally identical problems.
BnbReport solve_miqp(const MiqpProblem& problem, const BnbSettings& settings = {},
                     QpSolver* solver = nullptr);

/// Solve the QP for every binary assignment and return the best feasible
/// solution. Guarded to at most 12 binaries.
QpSolution enumerate_oracle(const MiqpProblem& problem, const QpSettings& settings = {});

}  // namespace microtube
