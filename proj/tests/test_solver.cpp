#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "doctest.h"
#include "microtube/bnb.hpp"
#include "microtube/builder.hpp"
#include "microtube/config.hpp"
#include "microtube/solver.hpp"

using namespace microtube;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MiqpProblem blank_problem(int n, int m_eq, int m_ineq) {
  MiqpProblem p;
  p.quad_cost = Eigen::VectorXd::Zero(n);
  p.lin_cost = Eigen::VectorXd::Zero(n);
  p.eq_mat.resize(m_eq, n);
  p.eq_rhs = Eigen::VectorXd::Zero(m_eq);
  p.ineq_mat.resize(m_ineq, n);
  p.ineq_rhs = Eigen::VectorXd::Zero(m_ineq);
  p.lb = Eigen::VectorXd::Constant(n, -kInf);
  p.ub = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

// Random feasible short-horizon dispatch instance with 2 binaries per slot.
MiqpProblem random_instance(std::mt19937& rng, const Plant& plant,
                            const ControllerConfig& cfg, int len) {
  std::uniform_int_distribution<int> start_dist(0, plant.time.slots_per_day - len);
  std::uniform_real_distribution<double> load_dist(20.0, 180.0);
  std::uniform_real_distribution<double> renew_dist(0.0, 100.0);
  std::uniform_real_distribution<double> soc_dist(0.45, 0.75);

  HorizonWindow w;
  w.start = start_dist(rng);
  w.load.resize(len);
  w.renewable.resize(len);
  for (int k = 0; k < len; ++k) {
    w.load[k] = load_dist(rng);
    w.renewable[k] = renew_dist(rng);
  }
  w.initial = split_soc(soc_dist(rng), plant.num_segments());
  w.prev_gen.resize(plant.num_generators());
  for (int j = 0; j < plant.num_generators(); ++j) w.prev_gen[j] = plant.generators[j].p_min;
  return build_nominal(w, plant, cfg);
}

}  // namespace

TEST_CASE("scalar QP with one inequality") {
  // min x^2 s.t. x >= 1
  MiqpProblem p = blank_problem(1, 0, 1);
  p.quad_cost[0] = 2.0;
  p.ineq_mat.insert(0, 0) = -1.0;
  p.ineq_rhs[0] = -1.0;
  const QpSolution sol = solve_qp(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x[0] - 1.0) < 1e-6);
  CHECK(std::abs(sol.objective - 1.0) < 1e-8);
}

TEST_CASE("boxed QP with an equality") {
  // min (x-3)^2 + (y-1)^2 s.t. x + y = 2, 0 <= x,y <= 2
  MiqpProblem p = blank_problem(2, 1, 0);
  p.quad_cost << 2.0, 2.0;
  p.lin_cost << -6.0, -2.0;
  p.cost_offset = 10.0;
  p.eq_mat.insert(0, 0) = 1.0;
  p.eq_mat.insert(0, 1) = 1.0;
  p.eq_rhs[0] = 2.0;
  p.lb << 0.0, 0.0;
  p.ub << 2.0, 2.0;
  const QpSolution sol = solve_qp(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x[0] - 2.0) < 1e-3);
  CHECK(std::abs(sol.x[1] - 0.0) < 1e-3);
  CHECK(std::abs(sol.objective - 2.0) < 1e-6);
}

TEST_CASE("contradictory equalities are certified infeasible") {
  // x = 0 and x = 1
  MiqpProblem p = blank_problem(1, 2, 0);
  p.quad_cost[0] = 2.0;
  p.eq_mat.insert(0, 0) = 1.0;
  p.eq_mat.insert(1, 0) = 1.0;
  p.eq_rhs << 0.0, 1.0;
  const QpSolution sol = solve_qp(p);
  CHECK(sol.status == SolveStatus::Infeasible);
  CHECK(sol.infeasibility_ray.size() > 0);
}

TEST_CASE("branch-and-bound on a binary-free problem reduces to the QP") {
  MiqpProblem p = blank_problem(2, 1, 0);
  p.quad_cost << 2.0, 2.0;
  p.lin_cost << -6.0, -2.0;
  p.eq_mat.insert(0, 0) = 1.0;
  p.eq_mat.insert(0, 1) = 1.0;
  p.eq_rhs[0] = 2.0;
  p.lb << 0.0, 0.0;
  p.ub << 2.0, 2.0;
  const QpSolution qp = solve_qp(p);
  const BnbReport rep = solve_miqp(p);
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rep.nodes_explored == 1);
  CHECK(std::abs(rep.incumbent.objective - qp.objective) < 1e-9);
}

TEST_CASE("enumeration oracle reports infeasible when every assignment fails") {
  MiqpProblem p = blank_problem(1, 1, 0);
  p.quad_cost[0] = 2.0;
  p.eq_mat.insert(0, 0) = 1.0;
  p.eq_rhs[0] = 0.5;
  p.lb[0] = 0.0;
  p.ub[0] = 1.0;
  p.binary_cols.push_back(0);
  const QpSolution sol = enumerate_oracle(p);
  CHECK(sol.status == SolveStatus::Infeasible);
  const BnbReport rep = solve_miqp(p);
  CHECK(rep.status == SolveStatus::Infeasible);
}

TEST_CASE("branch-and-bound matches exhaustive enumeration on random instances") {
  const RunConfig cfg = default_config();
  std::mt19937 rng(20240817);
  int feasible = 0;
  int attempts = 0;
  while (feasible < 200 && attempts < 600) {
    ++attempts;
    const int len = 1 + static_cast<int>(rng() % 3);  // 2, 4, or 6 binaries
    const MiqpProblem p = random_instance(rng, cfg.plant, cfg.controller, len);
    const BnbReport rep = solve_miqp(p, cfg.solver);
    const QpSolution oracle = enumerate_oracle(p, cfg.solver.qp);
    if (oracle.status != SolveStatus::Optimal) {
      CHECK(rep.status != SolveStatus::Optimal);
      continue;
    }
    ++feasible;
    REQUIRE(rep.status == SolveStatus::Optimal);
    const double scale = std::max(1.0, std::abs(oracle.objective));
    CHECK(std::abs(rep.incumbent.objective - oracle.objective) <= 1e-6 * scale);

    // binaries integral on the incumbent
    for (int b : p.binary_cols) {
      CHECK(std::abs(rep.incumbent.x[b] - std::round(rep.incumbent.x[b])) <= 1e-6);
    }

    // KKT residuals at the reported optimum
    CHECK(rep.incumbent.primal_residual <= 1e-6);
    CHECK(rep.incumbent.dual_residual <= 1e-6);

    // child relaxation bounds never undercut their parent's
    std::map<int, double> bound_by_id;
    for (const auto& node : rep.node_log) bound_by_id[node.node_id] = node.bound;
    for (const auto& node : rep.node_log) {
      if (node.parent_id < 0) continue;
      CHECK(node.bound >= bound_by_id.at(node.parent_id) - 1e-6);
    }
  }
  CHECK(feasible >= 200);
}

TEST_CASE("warm starts do not change the optimum") {
  const RunConfig cfg = default_config();
  std::mt19937 rng(99);
  const MiqpProblem p = random_instance(rng, cfg.plant, cfg.controller, 3);
  QpSolver solver(cfg.solver.qp);
  solver.setup(p);
  const QpSolution cold = solver.solve();
  REQUIRE(cold.status == SolveStatus::Optimal);

  WarmStart ws;
  ws.x = cold.x;
  ws.y.resize(cold.dual_eq.size() + cold.dual_ineq.size() + cold.dual_bounds.size());
  ws.y << cold.dual_eq, cold.dual_ineq, cold.dual_bounds;
  const QpSolution warm = solver.solve(&ws);
  REQUIRE(warm.status == SolveStatus::Optimal);
  CHECK(std::abs(warm.objective - cold.objective) <= 1e-8 * std::max(1.0, std::abs(cold.objective)));
}

TEST_CASE("a solver instance is reusable across box overrides") {
  const RunConfig cfg = default_config();
  std::mt19937 rng(5);
  const MiqpProblem p = random_instance(rng, cfg.plant, cfg.controller, 2);
  QpSolver solver(cfg.solver.qp);
  solver.setup(p);
  const QpSolution base = solver.solve();
  REQUIRE(base.status == SolveStatus::Optimal);

  // pin all binaries to their rounded relaxation values, then restore
  Eigen::VectorXd lb = p.lb, ub = p.ub;
  for (int b : p.binary_cols) lb[b] = ub[b] = std::round(base.x[b]);
  const QpSolution pinned = solver.solve_boxed(lb, ub);
  if (pinned.status == SolveStatus::Optimal) {
    CHECK(pinned.objective >= base.objective - 1e-6 * std::max(1.0, std::abs(base.objective)));
  }
  const QpSolution again = solver.solve();
  REQUIRE(again.status == SolveStatus::Optimal);
  CHECK(std::abs(again.objective - base.objective) < 1e-7 * std::max(1.0, std::abs(base.objective)));
}
