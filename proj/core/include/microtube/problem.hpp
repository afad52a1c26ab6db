#pragma once

// Canonical container for the mixed-integer convex QPs assembled by the
// horizon builders:
//
//   minimize    1/2 x' diag(quad_cost) x + lin_cost' x + cost_offset
//   subject to  eq_mat x = eq_rhs
//               ineq_mat x <= ineq_rhs
//               lb <= x <= ub
//               x[i] in {0,1} for i in binary_cols
//
// Problems are immutable once built; the variable map ties every column to
// a (slot, role, index) triple.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <string>
#include <vector>

namespace microtube {

using SparseMat = Eigen::SparseMatrix<double>;

/// Roles a column can play inside one slot of a horizon problem.
enum class VarRole {
  Gen,           // generator power, indexed by generator
  Buy,           // power bought from the utility
  Sell,          // power sold to the utility
  SegCharge,     // per-segment charging power, indexed by segment
  SegDischarge,  // per-segment discharging power, indexed by segment
  SegSoc,        // per-segment SoC share, indexed by segment
  Soc,           // aggregate SoC
  ModeDischarge, // binary u (1 = discharging)
  ModeBuy,       // binary v (1 = buying)
  SlackPos,      // balance slack, supply side (recovery mode only)
  SlackNeg,      // balance slack, demand side (recovery mode only)
};

const char* var_role_name(VarRole role);

/// Bijection (slot, role, index) <-> column for a horizon problem with a
/// fixed per-slot layout: gens, buy, sell, c_i, d_i, S_i, S, u, v.
class VarMap {
public:
  VarMap() = default;
  VarMap(int num_slots, int num_generators, int num_segments, bool balance_slack);

  int num_slots() const { return num_slots_; }
  int num_generators() const { return num_generators_; }
  int num_segments() const { return num_segments_; }
  bool has_balance_slack() const { return balance_slack_; }
  int slot_stride() const { return stride_; }
  int num_cols() const;

  /// Column of (slot, role, idx). idx indexes generators or segments and
  /// must be 0 for scalar roles.
  int col(int slot, VarRole role, int idx = 0) const;

  /// Human-readable name of a column, e.g. "t03.d5" or "t00.g1".
  std::string name(int column) const;

private:
  int num_slots_ = 0;
  int num_generators_ = 0;
  int num_segments_ = 0;
  int stride_ = 0;
  bool balance_slack_ = false;
};

/// Ties a binary mode column to the big-M inequality row it governs.
struct BigMLink {
  int binary_col;
  int ineq_row;
  double bound;
};

struct MiqpProblem {
  Eigen::VectorXd quad_cost;  // diagonal of Q (1/2 x'Qx convention)
  Eigen::VectorXd lin_cost;
  double cost_offset = 0.0;

  SparseMat eq_mat;
  Eigen::VectorXd eq_rhs;
  SparseMat ineq_mat;
  Eigen::VectorXd ineq_rhs;

  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  std::vector<int> binary_cols;
  std::vector<BigMLink> big_m;
  VarMap vars;

  int num_vars() const { return static_cast<int>(lin_cost.size()); }
  double objective(const Eigen::VectorXd& x) const;

  /// Plain-text dump: column names plus triplet-form constraint entries.
  void dump(std::ostream& os) const;
};

}  // namespace microtube
