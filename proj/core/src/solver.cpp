#include "microtube/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "microtube/errors.hpp"
#include <cstdio>
#include <cstdlib>

namespace microtube {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPin = 1e9;    // diagonal weight pinning fixed variables
constexpr double kTiny = 1e-300;

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}

void QpSolver::setup(const MiqpProblem& p) {
  const int n = p.num_vars();
  const int me = static_cast<int>(p.eq_rhs.size());
  const int mi = static_cast<int>(p.ineq_rhs.size());

  Eigen::VectorXi dims(3);
  dims << n, me, mi;
  const Eigen::VectorXd eq_vals =
      Eigen::Map<const Eigen::VectorXd>(p.eq_mat.valuePtr(), p.eq_mat.nonZeros());
  const Eigen::VectorXd ineq_vals =
      Eigen::Map<const Eigen::VectorXd>(p.ineq_mat.valuePtr(), p.ineq_mat.nonZeros());

  const bool same_structure =
      cached_dims_.size() == 3 && (cached_dims_.array() == dims.array()).all() &&
      cached_quad_.size() == p.quad_cost.size() && cached_quad_ == p.quad_cost &&
      cached_eq_vals_.size() == eq_vals.size() && cached_eq_vals_ == eq_vals &&
      cached_ineq_vals_.size() == ineq_vals.size() && cached_ineq_vals_ == ineq_vals;

  if (same_structure) {
    refresh_vectors(p);
    return;
  }

  n_ = n;
  m_eq_ = me;
  m_ineq_ = mi;
  m_ = me + mi;
  cached_dims_ = dims;
  cached_quad_ = p.quad_cost;
  cached_eq_vals_ = eq_vals;
  cached_ineq_vals_ = ineq_vals;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(p.eq_mat.nonZeros() + p.ineq_mat.nonZeros());
  for (int k = 0; k < p.eq_mat.outerSize(); ++k)
    for (SparseMat::InnerIterator it(p.eq_mat, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < p.ineq_mat.outerSize(); ++k)
    for (SparseMat::InnerIterator it(p.ineq_mat, k); it; ++it)
      trips.emplace_back(me + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  A_.resize(m_, n_);
  A_.setFromTriplets(trips.begin(), trips.end());
  A_.makeCompressed();

  P_diag_ = p.quad_cost;

  ineq_by_row_ = Eigen::SparseMatrix<double, Eigen::RowMajor>(p.ineq_mat);
  bigm_rows_.clear();
  for (const BigMLink& link : p.big_m) {
    BigMRow entry;
    entry.binary_col = link.binary_col;
    entry.row = link.ineq_row;
    entry.binary_coef = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(ineq_by_row_,
                                                                        link.ineq_row);
         it; ++it) {
      if (it.col() == link.binary_col) {
        entry.binary_coef = it.value();
      } else {
        entry.others.emplace_back(static_cast<int>(it.col()), it.value());
      }
    }
    bigm_rows_.push_back(std::move(entry));
  }

  refresh_vectors(p);
  build_kkt_pattern();
}

void QpSolver::refresh_vectors(const MiqpProblem& p) {
  q_ = p.lin_cost;
  cost_offset_ = p.cost_offset;
  eq_rhs_ = p.eq_rhs;
  ineq_rhs_ = p.ineq_rhs;
  lb0_ = p.lb;
  ub0_ = p.ub;
}

void QpSolver::build_kkt_pattern() {
  // Lower-triangular KKT: x diagonal, A block at rows n+i, dual diagonal.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n_ + A_.nonZeros() + m_);
  for (int j = 0; j < n_; ++j) trips.emplace_back(j, j, 1.0);
  for (int k = 0; k < A_.outerSize(); ++k)
    for (SparseMat::InnerIterator it(A_, k); it; ++it)
      trips.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -1.0);

  kkt_mat_.resize(n_ + m_, n_ + m_);
  kkt_mat_.setFromTriplets(trips.begin(), trips.end());
  kkt_mat_.makeCompressed();

  diag_pos_.assign(n_ + m_, -1);
  const int* outer = kkt_mat_.outerIndexPtr();
  const int* inner = kkt_mat_.innerIndexPtr();
  for (int col = 0; col < n_ + m_; ++col) {
    for (int idx = outer[col]; idx < outer[col + 1]; ++idx) {
      if (inner[idx] == col) {
        diag_pos_[col] = idx;
        break;
      }
    }
  }

  kkt_.analyzePattern(kkt_mat_);
  pattern_ready_ = true;
}

QpSolution QpSolver::solve(const WarmStart* warm) {
  if (!is_setup()) throw SolverError("solve called before setup");
  return run(lb0_, ub0_, warm);
}

QpSolution QpSolver::solve_boxed(const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                                 const WarmStart* warm) {
  if (!is_setup()) throw SolverError("solve called before setup");
  return run(lb, ub, warm);
}

QpSolution QpSolver::run(const Eigen::VectorXd& lb_in, const Eigen::VectorXd& ub_in,
                         const WarmStart* warm) {
  const int n = n_, me = m_eq_, mi = m_ineq_;
  const double delta = settings_.reg;

  // A pinned binary may collapse its big-M row to "nonnegative sum <= 0",
  // which has no interior. Pin the forced-zero columns as well so the
  // barrier never has to chase an empty interior.
  Eigen::VectorXd lb = lb_in, ub = ub_in;
  for (const BigMRow& bm : bigm_rows_) {
    const int b = bm.binary_col;
    if (!(std::isfinite(lb[b]) && lb[b] == ub[b])) continue;
    const double slack = ineq_rhs_[bm.row] - bm.binary_coef * lb[b];
    if (slack > 1e-9) continue;
    bool forcing = true;
    for (const auto& [col, coef] : bm.others) {
      if (!(coef > 0.0 && lb[col] >= -1e-12)) {
        forcing = false;
        break;
      }
    }
    if (!forcing) continue;
    for (const auto& [col, coef] : bm.others) lb[col] = ub[col] = 0.0;
  }

  // Rows whose columns are all pinned are decided by arithmetic: reject a
  // violated one outright, and relax a satisfied one so its slack keeps a
  // strict interior for the barrier.
  Eigen::VectorXd hvec = ineq_rhs_;
  for (int i = 0; i < mi; ++i) {
    bool all_pinned = true;
    double row_val = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(ineq_by_row_, i); it;
         ++it) {
      if (!(std::isfinite(lb[it.col()]) && lb[it.col()] == ub[it.col()])) {
        all_pinned = false;
        break;
      }
      row_val += it.value() * lb[it.col()];
    }
    if (!all_pinned) continue;
    if (row_val > hvec[i] + 1e-7) {
      QpSolution out;
      out.x.resize(n);
      for (int j = 0; j < n; ++j) {
        out.x[j] = (std::isfinite(lb[j]) && lb[j] == ub[j])
                       ? lb[j]
                       : std::clamp(0.0, lb_in[j], ub_in[j]);
      }
      out.dual_eq = Eigen::VectorXd::Zero(me);
      out.dual_ineq = Eigen::VectorXd::Zero(mi);
      out.dual_bounds = Eigen::VectorXd::Zero(n);
      out.status = SolveStatus::Infeasible;
      out.objective = 0.5 * out.x.dot(P_diag_.cwiseProduct(out.x)) + q_.dot(out.x) + cost_offset_;
      out.infeasibility_ray = Eigen::VectorXd::Zero(me + mi + n);
      out.infeasibility_ray[me + i] = 1.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(ineq_by_row_, i); it;
           ++it) {
        out.infeasibility_ray[me + mi + it.col()] = -it.value();
      }
      return out;
    }
    hvec[i] = row_val + 1.0;
  }

  // Variable classes: pinned (lb == ub), finite lower, finite upper.
  std::vector<bool> pinned(n), fl(n), fu(n);
  int nbar = 0;
  for (int j = 0; j < n; ++j) {
    pinned[j] = std::isfinite(lb[j]) && lb[j] == ub[j];
    fl[j] = !pinned[j] && std::isfinite(lb[j]);
    fu[j] = !pinned[j] && std::isfinite(ub[j]);
    nbar += (fl[j] ? 1 : 0) + (fu[j] ? 1 : 0);
  }
  const int nc = mi + nbar;  // complementarity pairs

  // Cut the A couplings of pinned columns inside the KKT values so each pin
  // is an isolated 1x1 pivot. Otherwise the huge pin weight leaks into the
  // factorization of the free block and corrupts the dual directions.
  {
    double* kv = kkt_mat_.valuePtr();
    const int* ko = kkt_mat_.outerIndexPtr();
    for (int j = 0; j < n; ++j) {
      int idx = ko[j];
      if (idx == diag_pos_[j]) ++idx;
      for (SparseMat::InnerIterator it(A_, j); it; ++it, ++idx) {
        kv[idx] = pinned[j] ? 0.0 : it.value();
      }
    }
  }

  // Primal start: warm point or box midpoints, pushed into the interior.
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) {
    double v = (warm && warm->x.size() == n) ? warm->x[j] : 0.0;
    if (pinned[j]) {
      v = lb[j];
    } else {
      if (fl[j]) v = std::max(v, lb[j] + 1.0);
      if (fu[j]) v = std::min(v, ub[j] - 1.0);
      if (fl[j] && fu[j] && lb[j] + 1.0 > ub[j] - 1.0) v = 0.5 * (lb[j] + ub[j]);
    }
    x[j] = v;
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd s(mi), z(mi);
  {
    const Eigen::VectorXd Aix = A_.bottomRows(mi) * x;
    for (int i = 0; i < mi; ++i) {
      s[i] = std::max(hvec[i] - Aix[i], 1.0);
      z[i] = 1.0;
    }
  }
  Eigen::VectorXd wl(n), zl(n), wu(n), zu(n);
  for (int j = 0; j < n; ++j) {
    wl[j] = fl[j] ? std::max(x[j] - lb[j], 1.0) : 1.0;
    zl[j] = fl[j] ? 1.0 : 0.0;
    wu[j] = fu[j] ? std::max(ub[j] - x[j], 1.0) : 1.0;
    zu[j] = fu[j] ? 1.0 : 0.0;
  }

  Eigen::VectorXd rd(n), rpe(me), rpi(mi), rl(n), ru(n);
  Eigen::VectorXd rhs(n + m_), sol(n + m_);
  Eigen::VectorXd dx(n), dy(me), dz(mi), ds(mi), dzl(n), dwl(n), dzu(n), dwu(n);
  Eigen::VectorXd cs(mi), cl(n), cu(n);

  double pres = kInf, dres = kInf, mu = 0.0;
  int iter = 0;

  // Best near-optimal iterate seen so far. Degenerate faces can stall the
  // complementarity gap and then blow up the duals; falling back to the best
  // iterate keeps the solve usable when it was already accurate.
  struct Best {
    double merit = kInf;
    double pres = kInf, dres = kInf;
    Eigen::VectorXd x, y, z, zl, zu;
  } best;
  // Smallest scaled primal residual seen over all iterates. A near-feasible
  // iterate disproves infeasibility no matter what the duals later do.
  double feas_level = kInf;
  // Accept a fallback iterate whose worst scaled residual is within this
  // factor of the convergence target.
  const double kAccept = 100.0;

  auto finalize = [&](SolveStatus status) {
    QpSolution out;
    out.x = x;
    for (int j = 0; j < n; ++j) {
      if (pinned[j]) out.x[j] = lb[j];
    }
    out.dual_eq = y;
    out.dual_ineq = z;
    out.dual_bounds = zu - zl;
    if (status != SolveStatus::Infeasible) {
      // Pinned variables carry the stationarity residual as their bound dual.
      const Eigen::VectorXd Aty = A_.transpose() * (Eigen::VectorXd(m_) << y, z).finished();
      for (int j = 0; j < n; ++j) {
        if (pinned[j]) out.dual_bounds[j] = -(P_diag_[j] * out.x[j] + q_[j] + Aty[j]);
      }
    }
    out.status = status;
    out.iterations = iter;
    out.primal_residual = pres;
    out.dual_residual = dres;
    out.objective = 0.5 * out.x.dot(P_diag_.cwiseProduct(out.x)) + q_.dot(out.x) + cost_offset_;
    return out;
  };

  // Polish the best iterate: fix its active set and solve the resulting
  // equality-constrained QP exactly, reusing the KKT structure. KKT
  // sufficiency for a convex QP makes the acceptance checks below a proof
  // of optimality, which recovers full accuracy when the barrier stalls on
  // a degenerate face.
  auto try_polish = [&](int budget) -> bool {
    if (!(best.merit < kInf) || best.pres > 1e-4) return false;
    // Classify each complementarity pair by the ratio of its dual to its
    // slack at the best iterate. Extreme ratios decide the pair outright;
    // balanced ratios are exactly the pairs a degenerate face leaves stalled,
    // so both assignments are tried, best guess first. Acceptance below is a
    // KKT certificate, so whichever face passes is provably optimal.
    const Eigen::VectorXd Aix = A_.bottomRows(mi) * best.x;
    struct AmbPair {
      int kind;  // 0 lower bound, 1 upper bound, 2 inequality row
      int idx;
      double logr;  // log(dual / slack); >= 0 guesses active
    };
    std::vector<int> base_fixed(n, 0);  // 0 free, 1 at lower bound, 2 at upper
    std::vector<char> base_act(mi, 0);
    std::vector<AmbPair> amb;
    auto classify = [](double w, double v) -> int {
      // 1 active, 0 inactive, -1 ambiguous
      if (w <= 1e-9) return 1;
      if (v <= 1e-9) return 0;
      const double r = v / w;
      if (r >= 1e7) return 1;
      if (r <= 1e-7) return 0;
      return -1;
    };
    for (int j = 0; j < n; ++j) {
      if (pinned[j]) continue;
      const double wl_n = fl[j] ? (best.x[j] - lb[j]) / (1.0 + std::abs(lb[j])) : kInf;
      const double wu_n = fu[j] ? (ub[j] - best.x[j]) / (1.0 + std::abs(ub[j])) : kInf;
      // Only the side the iterate is nearer to can be live.
      if (fl[j] && wl_n <= wu_n) {
        const int c = classify(wl_n, best.zl[j]);
        if (c == 1) base_fixed[j] = 1;
        else if (c < 0) amb.push_back({0, j, std::log(best.zl[j] / std::max(wl_n, 1e-12))});
      } else if (fu[j]) {
        const int c = classify(wu_n, best.zu[j]);
        if (c == 1) base_fixed[j] = 2;
        else if (c < 0) amb.push_back({1, j, std::log(best.zu[j] / std::max(wu_n, 1e-12))});
      }
    }
    for (int i = 0; i < mi; ++i) {
      const double w_n = (hvec[i] - Aix[i]) / (1.0 + std::abs(hvec[i]));
      const int c = classify(w_n, best.z[i]);
      if (c == 1) base_act[i] = 1;
      else if (c < 0) amb.push_back({2, i, std::log(best.z[i] / std::max(w_n, 1e-12))});
    }
    // Enumerate only the most balanced pairs; decide the rest by their guess.
    std::sort(amb.begin(), amb.end(), [](const AmbPair& a, const AmbPair& b) {
      return std::abs(a.logr) < std::abs(b.logr);
    });
    const int kmax = 12;
    for (size_t t = kmax; t < amb.size(); ++t) {
      if (amb[t].logr < 0.0) continue;
      if (amb[t].kind == 2) base_act[amb[t].idx] = 1;
      else base_fixed[amb[t].idx] = amb[t].kind == 0 ? 1 : 2;
    }
    const int k = std::min<int>(kmax, static_cast<int>(amb.size()));

    auto attempt_face = [&](std::vector<int> fixed, std::vector<char> act) -> bool {
    // The working set may miss constraints that are active at the optimum
    // (the face QP is then unbounded or badly determined) or include ones
    // that should not bind (their multiplier comes out negative). Add what
    // the trial point violates, drop the worst wrong-sign multiplier, and
    // re-solve until the set settles.
    Eigen::VectorXd px, py, pz;
    bool resolved = false;
    for (int round = 0; round < 10 && !resolved && budget > 0; ++round, --budget) {
      // Reduced face system: only free columns and active rows. Fixed
      // columns are folded into the right-hand side, which keeps the
      // conditioning at the problem's own scale.
      std::vector<int> colmap(n, -1), freecols;
      for (int j = 0; j < n; ++j) {
        if (!pinned[j] && fixed[j] == 0) {
          colmap[j] = static_cast<int>(freecols.size());
          freecols.push_back(j);
        }
      }
      std::vector<int> rowmap(mi, -1), actrows;
      for (int i = 0; i < mi; ++i) {
        if (act[i]) {
          rowmap[i] = static_cast<int>(actrows.size());
          actrows.push_back(i);
        }
      }
      const int nf = static_cast<int>(freecols.size());
      const int ma = static_cast<int>(actrows.size());
      const int nred = nf + me + ma;

      Eigen::VectorXd xfix = Eigen::VectorXd::Zero(n);
      for (int j = 0; j < n; ++j) {
        if (pinned[j] || fixed[j] == 1) xfix[j] = lb[j];
        else if (fixed[j] == 2) xfix[j] = ub[j];
      }
      const Eigen::VectorXd Afix = A_ * xfix;

      std::vector<Eigen::Triplet<double>> ktrips;
      ktrips.reserve(nf + A_.nonZeros() + me + ma);
      for (int f = 0; f < nf; ++f) {
        ktrips.emplace_back(f, f, P_diag_[freecols[f]] + delta);
      }
      for (int f = 0; f < nf; ++f) {
        for (SparseMat::InnerIterator it(A_, freecols[f]); it; ++it) {
          const int r = static_cast<int>(it.row());
          int rr = -1;
          if (r < me) rr = nf + r;
          else if (rowmap[r - me] >= 0) rr = nf + me + rowmap[r - me];
          if (rr >= 0) ktrips.emplace_back(rr, f, it.value());
        }
      }
      for (int r = 0; r < me + ma; ++r) ktrips.emplace_back(nf + r, nf + r, -delta);
      SparseMat kred(nred, nred);
      kred.setFromTriplets(ktrips.begin(), ktrips.end());

      Eigen::SimplicialLDLT<SparseMat> fact(kred);
      if (fact.info() != Eigen::Success) { if (getenv("QP_DBG")) fprintf(stderr, "polish: fact fail\n"); return false; }

      Eigen::VectorXd prhs(nred);
      for (int f = 0; f < nf; ++f) prhs[f] = -q_[freecols[f]];
      for (int r = 0; r < me; ++r) prhs[nf + r] = eq_rhs_[r] - Afix[r];
      for (int a = 0; a < ma; ++a) {
        prhs[nf + me + a] = hvec[actrows[a]] - Afix[me + actrows[a]];
      }

      // Iterative refinement against the unregularized system, so the
      // static regularization does not bias the stationarity conditions.
      Eigen::VectorXd psol = fact.solve(prhs);
      Eigen::VectorXd rfin;
      for (int pass = 0; pass < 4; ++pass) {
        rfin = prhs - Eigen::VectorXd(kred.selfadjointView<Eigen::Lower>() * psol);
        rfin.head(nf) += delta * psol.head(nf);
        rfin.tail(me + ma) -= delta * psol.tail(me + ma);
        if (pass == 3) break;
        psol += fact.solve(rfin);
      }

      // A large leftover residual means the system is inconsistent: some
      // column has no active constraint to absorb its gradient. Prefer
      // activating a nearly tight row touching that column; failing that,
      // move the column to the bound its gradient points at. The duals of
      // such a solve are garbage and must not drive drops.
      if (inf_norm(rfin) > 1e-6 * (1.0 + inf_norm(q_))) {
        int repaired = 0;
        for (int f = 0; f < nf; ++f) {
          if (std::abs(rfin[f]) <= 1e-7) continue;
          const int j = freecols[f];
          bool activated = false;
          for (SparseMat::InnerIterator it(A_, j); it; ++it) {
            const int r = static_cast<int>(it.row());
            if (r < me || act[r - me]) continue;
            const double slack = hvec[r - me] - Aix[r - me];
            if (slack <= 1e-3 * (1.0 + std::abs(hvec[r - me]))) {
              act[r - me] = true;
              activated = true;
              ++repaired;
            }
          }
          if (activated) continue;
          const double grad = -rfin[f];
          if (grad > 0.0 && fl[j]) {
            fixed[j] = 1;
            ++repaired;
          } else if (grad < 0.0 && fu[j]) {
            fixed[j] = 2;
            ++repaired;
          }
        }
        // Residual in a constraint row: the row is over-determined by the
        // fixed columns. Release the most interior fix on it, or let an
        // active inequality fall back to a slack row.
        for (int t = nf; t < nred; ++t) {
          if (std::abs(rfin[t]) <= 1e-7) continue;
          if (t >= nf + me) {
            act[actrows[t - nf - me]] = false;
            ++repaired;
            continue;
          }
          const int r = t - nf;
          int loosest = -1;
          double loosest_dist = -1.0;
          for (int j = 0; j < n; ++j) {
            if (fixed[j] == 0 || pinned[j]) continue;
            bool touches = false;
            for (SparseMat::InnerIterator it(A_, j); it; ++it) {
              if (it.row() == r) {
                touches = it.value() != 0.0;
                break;
              }
            }
            if (!touches) continue;
            const double dist = std::abs(best.x[j] - (fixed[j] == 1 ? lb[j] : ub[j]));
            if (dist > loosest_dist) {
              loosest_dist = dist;
              loosest = j;
            }
          }
          if (loosest >= 0) {
            fixed[loosest] = 0;
            ++repaired;
          }
        }
        if (repaired == 0) { if (getenv("QP_DBG")) fprintf(stderr, "polish: round %d unrepairable resid %g\n", round, inf_norm(rfin)); return false; }
        continue;
      }

      px = xfix;
      for (int f = 0; f < nf; ++f) px[freecols[f]] = psol[f];
      py = psol.segment(nf, me);
      pz = Eigen::VectorXd::Zero(mi);
      for (int a = 0; a < ma; ++a) pz[actrows[a]] = psol[nf + me + a];

      int added = 0;
      const double vtol = 1e-9;
      for (int j = 0; j < n; ++j) {
        if (pinned[j] || fixed[j] != 0) continue;
        if (fl[j] && px[j] < lb[j] - vtol * (1.0 + std::abs(lb[j]))) {
          fixed[j] = 1;
          ++added;
        } else if (fu[j] && px[j] > ub[j] + vtol * (1.0 + std::abs(ub[j]))) {
          fixed[j] = 2;
          ++added;
        }
      }
      const Eigen::VectorXd Aixp = A_.bottomRows(mi) * px;
      for (int i = 0; i < mi; ++i) {
        if (!act[i] && Aixp[i] > hvec[i] + vtol * (1.0 + std::abs(hvec[i]))) {
          act[i] = true;
          ++added;
        }
      }
      if (added > 0) continue;

      // Drop the constraint with the most negative multiplier, if any.
      Eigen::VectorXd plam(m_);
      plam << py, pz;
      const Eigen::VectorXd Aty = A_.transpose() * plam;
      double worst = -1e-6;
      int drop_row = -1, drop_col = -1;
      for (int i = 0; i < mi; ++i) {
        if (act[i] && pz[i] < worst) {
          worst = pz[i];
          drop_row = i;
          drop_col = -1;
        }
      }
      for (int j = 0; j < n; ++j) {
        if (pinned[j] || fixed[j] == 0) continue;
        const double g = P_diag_[j] * px[j] + q_[j] + Aty[j];
        const double mult = fixed[j] == 1 ? g : -g;  // sign of the bound dual
        if (mult < worst) {
          worst = mult;
          drop_row = -1;
          drop_col = j;
        }
      }
      if (drop_row >= 0) {
        act[drop_row] = false;
      } else if (drop_col >= 0) {
        fixed[drop_col] = 0;
      } else {
        resolved = true;
      }
    }
    if (!resolved) { if (getenv("QP_DBG")) fprintf(stderr, "polish: unsettled\n"); return false; }

    for (int i = 0; i < mi; ++i) {
      if (!act[i]) {
        pz[i] = 0.0;
      } else if (pz[i] < 0.0) {
        pz[i] = 0.0;
      }
    }

    // KKT residuals of the polished point against the original problem.
    Eigen::VectorXd plam(m_);
    plam << py, pz;
    const Eigen::VectorXd Aty = A_.transpose() * plam;
    Eigen::VectorXd pzl = Eigen::VectorXd::Zero(n), pzu = Eigen::VectorXd::Zero(n);
    double pdres = 0.0;
    for (int j = 0; j < n; ++j) {
      if (pinned[j]) continue;  // free dual absorbs the gradient
      const double g = P_diag_[j] * px[j] + q_[j] + Aty[j];
      if (fixed[j] == 1) {
        pzl[j] = std::max(g, 0.0);
        pdres = std::max(pdres, -g);
      } else if (fixed[j] == 2) {
        pzu[j] = std::max(-g, 0.0);
        pdres = std::max(pdres, g);
      } else {
        pdres = std::max(pdres, std::abs(g));
      }
    }
    const Eigen::VectorXd Axp = A_ * px;
    double ppres = me ? (Axp.head(me) - eq_rhs_).cwiseAbs().maxCoeff() : 0.0;
    for (int i = 0; i < mi; ++i) ppres = std::max(ppres, Axp[me + i] - hvec[i]);
    for (int j = 0; j < n; ++j) {
      if (std::isfinite(lb[j])) ppres = std::max(ppres, lb[j] - px[j]);
      if (std::isfinite(ub[j])) ppres = std::max(ppres, px[j] - ub[j]);
    }

    const double sp =
        1.0 + std::max(inf_norm(Axp), std::max(inf_norm(eq_rhs_), inf_norm(hvec)));
    const double sd = 1.0 + inf_norm(q_);
    if (getenv("QP_DBG")) fprintf(stderr, "polish: ppres %g pdres %g\n", ppres, pdres);
    if (ppres > settings_.eps_abs + settings_.eps_rel * sp) return false;
    if (pdres > settings_.eps_abs + settings_.eps_rel * sd) return false;

    x = px;
    y = py;
    z = pz;
    zl = pzl;
    zu = pzu;
    pres = ppres;
    dres = pdres;
    return true;
    };

    // Try assignments of the ambiguous pairs in order of distance from the
    // dual-informed guess (flip masks sorted by popcount). The budget caps
    // the total number of face solves across all assignments.
    std::vector<unsigned> flips(size_t{1} << k);
    for (unsigned f = 0; f < flips.size(); ++f) flips[f] = f;
    std::sort(flips.begin(), flips.end(), [](unsigned a, unsigned b) {
      const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
      return pa != pb ? pa < pb : a < b;
    });
    for (unsigned f : flips) {
      if (budget <= 0) break;
      std::vector<int> fixed = base_fixed;
      std::vector<char> act = base_act;
      for (int t = 0; t < k; ++t) {
        const bool on = (amb[t].logr >= 0.0) != (((f >> t) & 1u) != 0);
        if (amb[t].kind == 2) act[amb[t].idx] = on ? 1 : 0;
        else fixed[amb[t].idx] = on ? (amb[t].kind == 0 ? 1 : 2) : 0;
      }
      if (attempt_face(std::move(fixed), std::move(act))) return true;
    }
    return false;
  };

  int stalled = 0;
  int last_gain = 0;
  double gain_ref = kInf;
  for (iter = 1; iter <= settings_.max_iters; ++iter) {
    // Residuals (unscaled).
    const Eigen::VectorXd Ax = A_ * x;
    {
      Eigen::VectorXd lam(m_);
      lam << y, z;
      const Eigen::VectorXd Aty = A_.transpose() * lam;
      for (int j = 0; j < n; ++j) {
        rd[j] = pinned[j] ? 0.0
                          : P_diag_[j] * x[j] + q_[j] + Aty[j] - (fl[j] ? zl[j] : 0.0) +
                                (fu[j] ? zu[j] : 0.0);
      }
    }
    rpe = Ax.head(me) - eq_rhs_;
    rpi = Ax.tail(mi) + s - hvec;
    for (int j = 0; j < n; ++j) {
      rl[j] = fl[j] ? x[j] - lb[j] - wl[j] : 0.0;
      ru[j] = fu[j] ? ub[j] - x[j] - wu[j] : 0.0;
    }

    double gap = s.dot(z);
    for (int j = 0; j < n; ++j) {
      if (fl[j]) gap += wl[j] * zl[j];
      if (fu[j]) gap += wu[j] * zu[j];
    }
    mu = nc > 0 ? gap / nc : 0.0;

    pres = std::max({inf_norm(rpe), inf_norm(rpi), inf_norm(rl), inf_norm(ru)});
    dres = inf_norm(rd);
    if (trace_) trace_(iter, pres, dres);

    const double scale_p = 1.0 + std::max(inf_norm(Ax), std::max(inf_norm(eq_rhs_), inf_norm(hvec)));
    const double scale_d = 1.0 + inf_norm(q_);
    const double tol_p = settings_.eps_abs + settings_.eps_rel * scale_p;
    const double tol_d = settings_.eps_abs + settings_.eps_rel * scale_d;
    const double obj_now =
        0.5 * x.dot(P_diag_.cwiseProduct(x)) + q_.dot(x) + cost_offset_;
    // The total gap bounds the objective error, so scale it by the objective
    // rather than per-pair.
    const double tol_gap = settings_.eps_abs * (1.0 + std::abs(obj_now));
    const double merit = std::max({pres / tol_p, dres / tol_d, gap / tol_gap});
    feas_level = std::min(feas_level, pres / scale_p);
    if (merit < best.merit) {
      best.merit = merit;
      best.pres = pres;
      best.dres = dres;
      best.x = x;
      best.y = y;
      best.z = z;
      best.zl = zl;
      best.zu = zu;
    }
    if (merit <= 1.0) {
      return finalize(SolveStatus::Optimal);
    }
    // A degenerate face stalls the gap while the residuals oscillate; stop
    // burning iterations and let the active-set polish finish the job. A
    // solve that cannot halve its merit in 15 iterations is stuck.
    if (best.merit < 0.5 * gain_ref) {
      gain_ref = best.merit;
      last_gain = iter;
    }
    if (iter - last_gain >= 15) {
      if (try_polish(150)) return finalize(SolveStatus::Optimal);
      last_gain = iter;
    }

    // Farkas certificate from diverging duals. A near-feasible iterate seen
    // earlier disproves infeasibility, so skip the attempt in that case.
    const double dual_mag =
        std::max({inf_norm(y), inf_norm(z), inf_norm(zl), inf_norm(zu)});
    if (dual_mag > 1e5 && feas_level > 1e-6) {
      Eigen::VectorXd ray;
      if (farkas_certified(y, z, zl, zu, lb, ub, hvec, ray)) {
        QpSolution out = finalize(SolveStatus::Infeasible);
        out.infeasibility_ray = ray;
        return out;
      }
    }

    // Refresh the KKT diagonals and refactorize.
    // Barrier ratios are clamped so that a vanishing slack or dual cannot
    // push an overflow or a zero pivot into the factorization.
    const auto ratio = [](double num, double den) {
      return std::clamp(num / std::max(den, kTiny), 1e-12, 1e12);
    };
    double* vals = kkt_mat_.valuePtr();
    for (int j = 0; j < n; ++j) {
      double dbox = pinned[j] ? kPin : 0.0;
      if (fl[j]) dbox += ratio(zl[j], wl[j]);
      if (fu[j]) dbox += ratio(zu[j], wu[j]);
      vals[diag_pos_[j]] = P_diag_[j] + dbox + delta;
    }
    for (int i = 0; i < me; ++i) vals[diag_pos_[n + i]] = -delta;
    for (int i = 0; i < mi; ++i) vals[diag_pos_[n + me + i]] = -ratio(s[i], z[i]) - delta;

    kkt_.factorize(kkt_mat_);
    if (kkt_.info() != Eigen::Success) throw SolverError("KKT factorization failed");

    auto newton = [&](double sig_mu, bool corrector) {
      for (int i = 0; i < mi; ++i) {
        cs[i] = -s[i] * z[i] + sig_mu - (corrector ? ds[i] * dz[i] : 0.0);
      }
      for (int j = 0; j < n; ++j) {
        cl[j] = fl[j] ? -wl[j] * zl[j] + sig_mu - (corrector ? dwl[j] * dzl[j] : 0.0) : 0.0;
        cu[j] = fu[j] ? -wu[j] * zu[j] + sig_mu - (corrector ? dwu[j] * dzu[j] : 0.0) : 0.0;
      }
      for (int j = 0; j < n; ++j) {
        double r = -rd[j];
        if (fl[j]) r += (cl[j] - zl[j] * rl[j]) / std::max(wl[j], kTiny);
        if (fu[j]) r -= (cu[j] - zu[j] * ru[j]) / std::max(wu[j], kTiny);
        rhs[j] = pinned[j] ? 0.0 : r;
      }
      rhs.segment(n, me) = -rpe;
      for (int i = 0; i < mi; ++i) rhs[n + me + i] = -rpi[i] - cs[i] / z[i];

      sol = kkt_.solve(rhs);
      dx = sol.head(n);
      dy = sol.segment(n, me);
      dz = sol.tail(mi);
      ds = -(A_.bottomRows(mi) * dx) - rpi;
      for (int j = 0; j < n; ++j) {
        if (fl[j]) {
          dwl[j] = dx[j] + rl[j];
          dzl[j] = (cl[j] - zl[j] * dwl[j]) / std::max(wl[j], kTiny);
        } else {
          dwl[j] = dzl[j] = 0.0;
        }
        if (fu[j]) {
          dwu[j] = -dx[j] + ru[j];
          dzu[j] = (cu[j] - zu[j] * dwu[j]) / std::max(wu[j], kTiny);
        } else {
          dwu[j] = dzu[j] = 0.0;
        }
      }
    };

    auto max_step = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv,
                        const std::vector<bool>* mask) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
      }
      return a;
    };

    // Predictor.
    newton(0.0, false);
    const double ap_aff = std::min({max_step(s, ds, nullptr), max_step(wl, dwl, &fl),
                                    max_step(wu, dwu, &fu)});
    const double ad_aff = std::min({max_step(z, dz, nullptr), max_step(zl, dzl, &fl),
                                    max_step(zu, dzu, &fu)});
    double gap_aff = (s + ap_aff * ds).dot(z + ad_aff * dz);
    for (int j = 0; j < n; ++j) {
      if (fl[j]) gap_aff += (wl[j] + ap_aff * dwl[j]) * (zl[j] + ad_aff * dzl[j]);
      if (fu[j]) gap_aff += (wu[j] + ap_aff * dwu[j]) * (zu[j] + ad_aff * dzu[j]);
    }
    const double mu_aff = nc > 0 ? gap_aff / nc : 0.0;
    const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3.0) : 0.0;

    // Corrector.
    newton(sigma * mu, true);
    const double ap = settings_.step_frac * std::min({max_step(s, ds, nullptr),
                                                      max_step(wl, dwl, &fl),
                                                      max_step(wu, dwu, &fu)});
    const double ad = settings_.step_frac * std::min({max_step(z, dz, nullptr),
                                                      max_step(zl, dzl, &fl),
                                                      max_step(zu, dzu, &fu)});

    x += ap * dx;
    s += ap * ds;
    for (int j = 0; j < n; ++j) {
      if (pinned[j]) x[j] = lb[j];
      if (fl[j]) wl[j] += ap * dwl[j];
      if (fu[j]) wu[j] += ap * dwu[j];
    }

    // An ill-conditioned factorization near a degenerate face can emit a
    // dual direction that wrecks an otherwise accurate iterate; backtrack
    // the dual step until the stationarity residual stays sane.
    double adk = ad;
    for (int bt = 0; bt < 8; ++bt) {
      Eigen::VectorXd lamN(m_);
      lamN << y + adk * dy, z + adk * dz;
      const Eigen::VectorXd AtyN = A_.transpose() * lamN;
      double dresN = 0.0;
      for (int j = 0; j < n; ++j) {
        if (pinned[j]) continue;
        const double r = P_diag_[j] * x[j] + q_[j] + AtyN[j] -
                         (fl[j] ? zl[j] + adk * dzl[j] : 0.0) +
                         (fu[j] ? zu[j] + adk * dzu[j] : 0.0);
        dresN = std::max(dresN, std::abs(r));
      }
      if (dresN <= 100.0 * (dres + tol_d)) break;
      adk *= 0.25;
    }

    y += adk * dy;
    z += adk * dz;
    for (int j = 0; j < n; ++j) {
      if (fl[j]) zl[j] += adk * dzl[j];
      if (fu[j]) zu[j] += adk * dzu[j];
    }

    if (std::max(ap, adk) < 1e-8) {
      if (++stalled >= 3) break;
    } else {
      stalled = 0;
    }
  }

  iter = std::min(iter, settings_.max_iters);

  if (try_polish(600)) return finalize(SolveStatus::Optimal);

  // Duals can blow up after the iterate is already accurate (degenerate
  // active sets leave the dual split underdetermined); hand back the best
  // near-optimal point instead of the wrecked final one.
  if (best.merit <= kAccept) {
    x = best.x;
    y = best.y;
    z = best.z;
    zl = best.zl;
    zu = best.zu;
    pres = best.pres;
    dres = best.dres;
    return finalize(SolveStatus::Optimal);
  }

  // One last Farkas attempt before giving up.
  if (feas_level > 1e-6) {
    Eigen::VectorXd ray;
    if (farkas_certified(y, z, zl, zu, lb, ub, hvec, ray)) {
      QpSolution out = finalize(SolveStatus::Infeasible);
      out.infeasibility_ray = ray;
      return out;
    }
  }
  if (best.merit < kInf) {
    x = best.x;
    y = best.y;
    z = best.z;
    zl = best.zl;
    zu = best.zu;
    pres = best.pres;
    dres = best.dres;
  }
  return finalize(SolveStatus::IterationLimit);
}

bool QpSolver::farkas_certified(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& zl, const Eigen::VectorXd& zu,
                                const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                                const Eigen::VectorXd& ineq_rhs, Eigen::VectorXd& ray) const {
  const int n = n_, me = m_eq_, mi = m_ineq_;
  const double norm = std::max({inf_norm(y), inf_norm(z), inf_norm(zl), inf_norm(zu)});
  if (norm < 1e-12) return false;

  Eigen::VectorXd lam(m_);
  lam << y, z;
  Eigen::VectorXd At = A_.transpose() * lam;
  // Pinned variables (lb == ub) act as equality bounds whose dual is free,
  // so they absorb any stationarity residual on their column.
  Eigen::VectorXd bound_dual = Eigen::VectorXd::Zero(n);
  double resid = 0.0;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lb[j]) && lb[j] == ub[j]) {
      bound_dual[j] = -At[j];
    } else {
      bound_dual[j] = zu[j] - zl[j];
      resid = std::max(resid, std::abs(At[j] + bound_dual[j]) / norm);
    }
  }
  if (resid > settings_.eps_infeas) return false;

  double support = eq_rhs_.dot(y) + ineq_rhs.dot(z);
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lb[j]) && lb[j] == ub[j]) {
      support += lb[j] * bound_dual[j];
      continue;
    }
    if (zl[j] / norm > settings_.eps_infeas && !std::isfinite(lb[j])) return false;
    if (zu[j] / norm > settings_.eps_infeas && !std::isfinite(ub[j])) return false;
    if (std::isfinite(lb[j])) support -= lb[j] * zl[j];
    if (std::isfinite(ub[j])) support += ub[j] * zu[j];
  }
  if (support / norm > -settings_.eps_infeas) return false;

  ray.resize(me + mi + n);
  ray.head(me) = y / norm;
  ray.segment(me, mi) = z / norm;
  ray.tail(n) = bound_dual / norm;
  return true;
}

QpSolution solve_qp(const MiqpProblem& problem, const WarmStart* warm,
                    const QpSettings& settings) {
  QpSolver solver(settings);
  solver.setup(problem);
  return solver.solve(warm);
}

}  // namespace microtube
