#include "microtube/problem.hpp"

#include <cassert>
#include <ostream>
#include <sstream>

#include "microtube/errors.hpp"

namespace microtube {

const char* var_role_name(VarRole role) {
  switch (role) {
    case VarRole::Gen: return "g";
    case VarRole::Buy: return "b";
    case VarRole::Sell: return "s";
    case VarRole::SegCharge: return "c";
    case VarRole::SegDischarge: return "d";
    case VarRole::SegSoc: return "Si";
    case VarRole::Soc: return "S";
    case VarRole::ModeDischarge: return "u";
    case VarRole::ModeBuy: return "v";
    case VarRole::SlackPos: return "slack+";
    case VarRole::SlackNeg: return "slack-";
  }
  return "?";
}

VarMap::VarMap(int num_slots, int num_generators, int num_segments, bool balance_slack)
    : num_slots_(num_slots),
      num_generators_(num_generators),
      num_segments_(num_segments),
      balance_slack_(balance_slack) {
  stride_ = num_generators_ + 2 + 3 * num_segments_ + 1 + 2;
  if (balance_slack_) stride_ += 2;
}

int VarMap::num_cols() const { return num_slots_ * stride_; }

int VarMap::col(int slot, VarRole role, int idx) const {
  assert(slot >= 0 && slot < num_slots_);
  const int base = slot * stride_;
  const int g = num_generators_;
  const int n = num_segments_;
  switch (role) {
    case VarRole::Gen:
      assert(idx >= 0 && idx < g);
      return base + idx;
    case VarRole::Buy: return base + g;
    case VarRole::Sell: return base + g + 1;
    case VarRole::SegCharge:
      assert(idx >= 0 && idx < n);
      return base + g + 2 + idx;
    case VarRole::SegDischarge:
      assert(idx >= 0 && idx < n);
      return base + g + 2 + n + idx;
    case VarRole::SegSoc:
      assert(idx >= 0 && idx < n);
      return base + g + 2 + 2 * n + idx;
    case VarRole::Soc: return base + g + 2 + 3 * n;
    case VarRole::ModeDischarge: return base + g + 2 + 3 * n + 1;
    case VarRole::ModeBuy: return base + g + 2 + 3 * n + 2;
    case VarRole::SlackPos:
      assert(balance_slack_);
      return base + g + 2 + 3 * n + 3;
    case VarRole::SlackNeg:
      assert(balance_slack_);
      return base + g + 2 + 3 * n + 4;
  }
  return -1;
}

std::string VarMap::name(int column) const {
  const int slot = column / stride_;
  int off = column % stride_;
  const int g = num_generators_;
  const int n = num_segments_;
  std::ostringstream os;
  os << "t" << slot << ".";
  if (off < g) { os << "g" << off + 1; return os.str(); }
  off -= g;
  if (off == 0) { os << "b"; return os.str(); }
  if (off == 1) { os << "s"; return os.str(); }
  off -= 2;
  if (off < n) { os << "c" << off + 1; return os.str(); }
  off -= n;
  if (off < n) { os << "d" << off + 1; return os.str(); }
  off -= n;
  if (off < n) { os << "Si" << off + 1; return os.str(); }
  off -= n;
  if (off == 0) { os << "S"; return os.str(); }
  if (off == 1) { os << "u"; return os.str(); }
  if (off == 2) { os << "v"; return os.str(); }
  os << (off == 3 ? "slack+" : "slack-");
  return os.str();
}

double MiqpProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(quad_cost.cwiseProduct(x)) + lin_cost.dot(x) + cost_offset;
}

void MiqpProblem::dump(std::ostream& os) const {
  os << "columns " << num_vars() << "\n";
  for (int j = 0; j < num_vars(); ++j) {
    os << j << " " << vars.name(j) << " quad " << quad_cost[j] << " lin " << lin_cost[j]
       << " bounds [" << lb[j] << ", " << ub[j] << "]\n";
  }
  os << "equalities " << eq_mat.rows() << "\n";
  for (int k = 0; k < eq_mat.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(eq_mat, k); it; ++it) {
      os << "E " << it.row() << " " << vars.name(static_cast<int>(it.col())) << " "
         << it.value() << "\n";
    }
  }
  for (int r = 0; r < eq_rhs.size(); ++r) os << "E " << r << " rhs " << eq_rhs[r] << "\n";
  os << "inequalities " << ineq_mat.rows() << "\n";
  for (int k = 0; k < ineq_mat.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(ineq_mat, k); it; ++it) {
      os << "I " << it.row() << " " << vars.name(static_cast<int>(it.col())) << " "
         << it.value() << "\n";
    }
  }
  for (int r = 0; r < ineq_rhs.size(); ++r) os << "I " << r << " rhs " << ineq_rhs[r] << "\n";
  os << "binaries";
  for (int b : binary_cols) os << " " << vars.name(b);
  os << "\n";
}

}  // namespace microtube
