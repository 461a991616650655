#include "mixlab/experiment.hpp"

#include "mixlab/domain_mesh.hpp"
#include "mixlab/elliptic_core.hpp"
#include "mixlab/errors.hpp"
#include "mixlab/nehari_lab.hpp"
#include "mixlab/operators.hpp"
#include "mixlab/random_fields.hpp"
#include "mixlab/singular_flow.hpp"
#include "mixlab/sobolev_lab.hpp"

#include <Eigen/Eigenvalues>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace mixlab {

const char* status_name(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::skip: return "skip";
  }
  return "?";
}

const std::vector<InvariantInfo>& invariant_catalog() {
  static const std::vector<InvariantInfo> catalog = {
      {"DM1", "domain_mesh", "region tags partition the node set; DOF count matches"},
      {"DM2", "domain_mesh", "tail weight positive on Omega nodes and unchanged by refinement"},
      {"OP1", "operators", "A_loc, A_nl, M_omega, M_full, A symmetric to 1e-12 relative"},
      {"OP2", "operators", "A and M_full positive definite, A_loc and M_omega semi-definite"},
      {"OP3", "operators", "A_loc rows of collar-interior DOFs vanish"},
      {"OP4", "operators", "no collar x collar coupling beyond overlapping supports"},
      {"OP5", "operators", "extra far-field Gauss points change A_nl by < 1e-8 relative"},
      {"OP6", "operators", "A_nl linear in kernel_constant, A_loc unchanged"},
      {"OP7", "operators", "discrete Poincare constant positive and stable within 20% under refinement"},
      {"EC1", "elliptic_core", "solutions for f >= 0, f != 0 positive on Omega-interior DOFs"},
      {"EC2", "elliptic_core", "||u||_inf <= C' ||f||_inf across random f"},
      {"EC3", "elliptic_core", "collar values match the nonlocal Neumann reconstruction"},
      {"EC4", "elliptic_core", "phi_1 > 0 on Omega-interior DOFs; Rayleigh quotient equals lambda_1"},
      {"SF1", "singular_flow", "u_n <= u_{n+1} nodally within 1e-8"},
      {"SF2", "singular_flow", "min over the middle half of Omega bounded below uniformly in n"},
      {"SF3", "singular_flow", "eta(u_n) non-decreasing within 1e-10"},
      {"SF4", "singular_flow", "|eta(u)^2 - int u^{1-q}| <= 1e-6 eta(u)^2 for 0 < q < 1"},
      {"SF5", "singular_flow", "schedules from different initial iterates agree within 1e-6"},
      {"SF6", "singular_flow", "eta(u_n^{(q+1)/2})^2 <= (q+1)^2/(4q) |Omega| (1.01) for q > 1"},
      {"SF7", "singular_flow", "sup norms plateau (< 1% growth) and collar values stay below the Omega sup"},
      {"SF8", "singular_flow", "weak comparison v >= u - 1e-8 on constructed pairs"},
      {"SF9", "singular_flow", "algebraic inequality: no violations on 1e5 random samples"},
      {"SF10", "singular_flow", "eta(u_n)^2 <= |Omega| for q = 1"},
      {"SL1", "sobolev_lab", "eta(|v|) <= eta(v) on random vectors"},
      {"SL2", "sobolev_lab", "equality cases are multiples of V (energy cosine > 1 - 1e-6)"},
      {"SL3", "sobolev_lab", "|R_rayleigh - R_formula| <= 1% R_formula; argmin within 1e-3 of V"},
      {"SL4", "sobolev_lab", "formula/minimization gap does not grow under refinement"},
      {"SL5", "sobolev_lab", "inequality holds with C = R(1-1e-6) on 1000 random v; fails at V with 1.05 R"},
      {"NL1", "nehari_lab", "fiber roots bracket t_max with correct curvature; |Phi'| <= 1e-8 eta^2"},
      {"NL2", "nehari_lab", "converged minimizers are not degenerate (|Phi''(1)| > 1e-8 eta^2)"},
      {"NL3", "nehari_lab", "eta bounded on N^+ runs and bounded away from 0 on N^- runs"},
      {"NL4", "nehari_lab", "J >= A eta^2 - B eta^{1-q} along plus-branch trajectories"},
      {"NL5", "nehari_lab", "both branches converge: residual <= tol, J_plus < 0, separation > 1e3 tol"},
      {"NL6", "nehari_lab", "both solutions dominate the barrier beta phi_1 - 1e-6"},
      {"NL7", "nehari_lab", "no positive solution found at lambda = 2 mu*"},
      {"EX1", "experiment_cli", "identical config and seeds give bit-identical CSV output"},
      {"EX2", "experiment_cli", "every invariant of the command appears in the manifest"},
  };
  return catalog;
}

void InvariantLog::record(const std::string& id, Status status, const std::string& detail) {
  const auto& cat = invariant_catalog();
  if (std::none_of(cat.begin(), cat.end(), [&](const InvariantInfo& i) { return i.id == id; }))
    throw std::logic_error("unknown invariant id " + id);
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    entries_[id] = {status, detail};
    return;
  }
  Entry& e = it->second;
  auto rank = [](Status s) { return s == Status::fail ? 2 : s == Status::pass ? 1 : 0; };
  if (rank(status) > rank(e.status)) e.status = status;
  if (!detail.empty()) e.detail += (e.detail.empty() ? "" : "; ") + detail;
}

bool InvariantLog::any_failed() const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [](const auto& kv) { return kv.second.status == Status::fail; });
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"assemble", "singular", "sobolev", "nehari",
                                                 "verify"};
  return names;
}

namespace {

namespace fs = std::filesystem;

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("csv: wrong number of cells");
    row_strings(cells);
  }
  const std::string& text() const { return text_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
  }
  std::size_t columns_;
  std::string text_;
};

std::string R(double x) { return format_real(x); }
std::string I(long long x) { return std::to_string(x); }

std::string two_column(const Mesh& mesh, const GridFunction& u) {
  std::string out;
  const Eigen::VectorXd nodal = mesh.to_nodal(u);
  for (std::size_t k = 0; k < mesh.node_count(); ++k)
    out += R(mesh.node(k)) + " " + R(nodal[static_cast<Eigen::Index>(k)]) + "\n";
  return out;
}

double sym_defect(const Eigen::MatrixXd& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  const double d = (m - m.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
  return norm > 0.0 ? d / norm : d;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

double poincare_constant(const OperatorSet& ops) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(ops.A, ops.M_full,
                                                               Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opt;
  std::string command;
  fs::path out_dir;
  InvariantLog log;
  std::set<std::string> outputs;
  std::unique_ptr<OperatorSet> ops;
  std::unique_ptr<SpdSolver> solver;
  std::optional<EigenPair> eig;

  Context(const ExperimentConfig& c, const RunOptions& o, std::string cmd)
      : cfg(c), opt(o), command(std::move(cmd)) {
    out_dir = o.out_dir.empty() ? fs::path(c.output_dir) : fs::path(o.out_dir);
  }

  std::uint64_t seed(std::size_t k = 0) const {
    return cfg.seeds[k % cfg.seeds.size()] + opt.seed_offset;
  }

  void note(const std::string& msg) const {
    if (opt.quiet) return;
    (opt.log ? *opt.log : std::cerr) << "[" << command << "] " << msg << "\n";
  }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
    f << content;
    outputs.insert(name);
  }

  const OperatorSet& operators() {
    if (!ops) {
      note("assembling h=" + fmt(cfg.domain.h) + " s=" + fmt(cfg.domain.s));
      ops = std::make_unique<OperatorSet>(assemble(build_mesh(cfg.domain), cfg.quad_order));
      solver = std::make_unique<SpdSolver>(ops->A, cfg.linear_solver, cfg.tolerances.linear);
    }
    return *ops;
  }

  const SpdSolver& spd() {
    operators();
    return *solver;
  }

  const EigenPair& eigenpair() {
    if (!eig) eig = first_eigenpair(operators(), cfg.tolerances.eigen, cfg.linear_solver);
    return *eig;
  }
};

// ---------------------------------------------------------------- domain / operators

void check_domain(Context& ctx) {
  const Mesh& mesh = ctx.operators().mesh;
  const DomainSpec& d = ctx.cfg.domain;
  std::map<Region, std::size_t> count;
  for (std::size_t k = 0; k < mesh.node_count(); ++k) ++count[mesh.region(k)];
  const auto omega_steps = static_cast<std::size_t>(std::llround(d.omega_length() / d.h));
  const auto collar_steps = static_cast<std::size_t>(std::llround(d.collar_width / d.h));
  const bool ok = count[Region::dirichlet_left] == 1 && count[Region::dirichlet_right] == 1 &&
                  count[Region::neumann_point] == 1 &&
                  count[Region::omega_interior] == omega_steps - 1 &&
                  count[Region::collar_interior] == collar_steps - 1 &&
                  mesh.dof_count() == (omega_steps - 1) + 1 + (collar_steps - 1) &&
                  mesh.region(0) == Region::dirichlet_left &&
                  mesh.region(mesh.node_count() - 1) == Region::dirichlet_right;
  ctx.log.check("DM1", ok, "nodes=" + I(static_cast<long long>(mesh.node_count())));

  DomainSpec fine = d;
  fine.h = d.h / 2.0;
  double min_w = std::numeric_limits<double>::infinity();
  double max_change = 0.0;
  for (std::size_t k = 0; k < mesh.node_count(); ++k) {
    if (mesh.region(k) != Region::omega_interior) continue;
    const double w = dirichlet_tail_weight(mesh.node(k), d);
    min_w = std::min(min_w, w);
    max_change = std::max(max_change, std::abs(dirichlet_tail_weight(mesh.node(k), fine) - w));
  }
  ctx.log.check("DM2", min_w > 0.0 && max_change == 0.0,
                "min tail weight " + fmt(min_w) + ", refinement change " + fmt(max_change));
}

void check_operators(Context& ctx) {
  const OperatorSet& ops = ctx.operators();
  const Mesh& mesh = ops.mesh;

  double sym = 0.0;
  for (const Eigen::MatrixXd* m : {&ops.A_loc, &ops.A_nl, &ops.M_omega, &ops.M_full, &ops.A})
    sym = std::max(sym, sym_defect(*m));
  ctx.log.check("OP1", sym <= 1e-12, "max relative asymmetry " + fmt(sym));

  const double ev_A = min_eigenvalue(ops.A);
  const double ev_Mf = min_eigenvalue(ops.M_full);
  const double ev_Al = min_eigenvalue(ops.A_loc);
  const double ev_Mo = min_eigenvalue(ops.M_omega);
  const double scale_loc = ops.A_loc.cwiseAbs().maxCoeff();
  const double scale_mo = ops.M_omega.cwiseAbs().maxCoeff();
  ctx.log.check("OP2",
                ev_A > 0.0 && ev_Mf > 0.0 && ev_Al >= -1e-12 * scale_loc &&
                    ev_Mo >= -1e-12 * scale_mo,
                "min eig A " + fmt(ev_A) + ", M_full " + fmt(ev_Mf) + ", A_loc " + fmt(ev_Al) +
                    ", M_omega " + fmt(ev_Mo) + " (singular on collar rows)");

  std::vector<Eigen::Index> collar;
  for (std::size_t i = 0; i < ops.dofs(); ++i)
    if (mesh.dof_region(i) == Region::collar_interior) collar.push_back(static_cast<Eigen::Index>(i));
  double loc_rows = 0.0;
  for (Eigen::Index i : collar) loc_rows = std::max(loc_rows, ops.A_loc.row(i).cwiseAbs().maxCoeff());
  ctx.log.check("OP3", loc_rows == 0.0, "max |A_loc| on collar rows " + fmt(loc_rows));

  double far = 0.0;
  for (Eigen::Index i : collar)
    for (Eigen::Index j : collar)
      if (std::abs(i - j) >= 2) far = std::max(far, std::abs(ops.A_nl(i, j)));
  ctx.log.check("OP4", far == 0.0, "max |A_nl| between non-overlapping collar DOFs " + fmt(far));

  const OperatorSet richer = assemble(mesh, ops.quad_order + 4);
  double trunc = 0.0;
  const double floor = 1e-12 * ops.A_nl.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ops.A_nl.rows(); ++i)
    for (Eigen::Index j = 0; j < ops.A_nl.cols(); ++j) {
      const double ref = std::abs(richer.A_nl(i, j));
      if (ref > floor) trunc = std::max(trunc, std::abs(richer.A_nl(i, j) - ops.A_nl(i, j)) / ref);
    }
  ctx.log.check("OP5", trunc < 1e-8,
                "quad_order " + I(ops.quad_order) + " vs " + I(ops.quad_order + 4) +
                    ": max relative change " + fmt(trunc));

  DomainSpec doubled = ctx.cfg.domain;
  doubled.kernel_constant *= 2.0;
  const OperatorSet ops2 = assemble(build_mesh(doubled), ops.quad_order);
  const double lin = (ops2.A_nl - 2.0 * ops.A_nl).cwiseAbs().maxCoeff() /
                     ops.A_nl.cwiseAbs().maxCoeff();
  const double loc = (ops2.A_loc - ops.A_loc).cwiseAbs().maxCoeff();
  ctx.log.check("OP6", lin <= 1e-14 && loc == 0.0,
                "kappa doubling defect " + fmt(lin) + ", A_loc change " + fmt(loc));

  DomainSpec finer = ctx.cfg.domain;
  finer.h /= 2.0;
  const double c0 = poincare_constant(ops);
  const double c1 = poincare_constant(assemble(build_mesh(finer), ops.quad_order));
  const double drift = std::abs(c1 - c0) / c0;
  ctx.log.check("OP7", c0 > 0.0 && c1 > 0.0 && drift <= 0.2,
                "Poincare constant " + fmt(c0) + " -> " + fmt(c1) + " (h/2)");
}

// ---------------------------------------------------------------- elliptic core

void check_elliptic(Context& ctx) {
  const OperatorSet& ops = ctx.operators();
  const Mesh& mesh = ops.mesh;
  const double tol = ctx.cfg.tolerances.linear;

  const GridFunction green = solve_linear(ops, GridFunction::Ones(ops.dofs()), tol).u;
  const double bound = green.cwiseAbs().maxCoeff();
  int nonpositive = 0;
  double worst_ratio = 0.0;
  std::mt19937_64 gen(ctx.seed());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    GridFunction f = random_positive(ops.dofs(), ctx.seed(trial) * 31u + static_cast<std::uint64_t>(trial), 0.0, 1.0);
    if (trial % 2 == 1) {
      // Sparse data: a single bump, the hardest case for positivity.
      f.setZero();
      const auto i = static_cast<Eigen::Index>(unit(gen) * static_cast<double>(mesh.neumann_node() - 1));
      f[i] = 1.0;
    }
    const LinearSolveReport r = solve_linear(ops, f, tol);
    for (std::size_t i = 0; i < ops.dofs(); ++i)
      if (mesh.dof_region(i) == Region::omega_interior && !(r.u[static_cast<Eigen::Index>(i)] > 0.0))
        ++nonpositive;
    worst_ratio = std::max(worst_ratio, r.u.cwiseAbs().maxCoeff() / f.cwiseAbs().maxCoeff());
  }
  ctx.log.check("EC1", nonpositive == 0, I(nonpositive) + " non-positive Omega values over 20 solves");
  ctx.log.check("EC2", worst_ratio <= bound * (1.0 + 1e-10),
                "max ||u||/||f|| " + fmt(worst_ratio) + " vs ||A^{-1} w||_inf " + fmt(bound));

  // The last collar node is tied to the Dirichlet value, so the discrete solution
  // has a boundary layer of a few elements there; compare away from it.
  const Eigen::VectorXd rec = nonlocal_neumann_reconstruction(mesh, green);
  const std::vector<std::size_t> nodes = collar_nodes(mesh);
  double err = 0.0;
  for (std::size_t k = 0; k + 10 < nodes.size(); ++k)
    err = std::max(err, std::abs(green[static_cast<Eigen::Index>(*mesh.dof(nodes[k]))] -
                                 rec[static_cast<Eigen::Index>(k)]));
  ctx.log.check("EC3", err <= 1e-4 * bound,
                "max |u - reconstruction| / ||u|| = " + fmt(err / bound) +
                    " (collar nodes >= 10h from the Dirichlet end)");

  const EigenPair& eig = ctx.eigenpair();
  double phi_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ops.dofs(); ++i)
    if (mesh.dof_region(i) == Region::omega_interior)
      phi_min = std::min(phi_min, eig.phi1[static_cast<Eigen::Index>(i)]);
  const double rq = rayleigh_quotient(ops, eig.phi1);
  const double rq_gap = std::abs(rq - eig.lambda1) / eig.lambda1;
  ctx.log.check("EC4", phi_min > 0.0 && rq_gap <= 10.0 * ctx.cfg.tolerances.eigen + 1e-14,
                "lambda_1 " + fmt(eig.lambda1) + ", min phi_1 on Omega " + fmt(phi_min));

  Csv csv({"h", "s", "kernel_constant", "dofs", "lambda1", "poincare_constant", "eigen_iterations"});
  csv.row({R(ctx.cfg.domain.h), R(ctx.cfg.domain.s), R(ctx.cfg.domain.kernel_constant),
           I(static_cast<long long>(ops.dofs())), R(eig.lambda1), R(poincare_constant(ops)),
           I(eig.iterations)});
  ctx.write("spectral.csv", csv.text());
  ctx.write("phi1.txt", two_column(mesh, eig.phi1));
}

// ---------------------------------------------------------------- singular flow

std::string qtag(double q) {
  std::ostringstream s;
  s << q;
  return s.str();
}

SingularLimit solve_singular(Context& ctx, double q) {
  const LevelOptions lo{ctx.cfg.tolerances.outer, 5000};
  SingularLimit lim = run_schedule(ctx.operators(), ctx.spd(), q, ctx.cfg.n_schedule, lo);
  if (!lim.ok()) {
    std::ostringstream msg;
    msg << "singular schedule (q=" << q << ") failed at level " << *lim.failed_level << ": "
        << lim.failure;
    throw SolverError(msg.str(), 0.0);
  }
  return lim;
}

void check_singular(Context& ctx, double q) {
  const OperatorSet& ops = ctx.operators();
  const Mesh& mesh = ops.mesh;
  const std::string tag = "q=" + qtag(q) + ": ";
  ctx.note("singular schedule " + tag + I(static_cast<long long>(ctx.cfg.n_schedule.size())) + " levels");
  const SingularLimit lim = solve_singular(ctx, q);

  Csv csv({"n", "eta_sq", "sup", "omega_min", "weak_residual", "outer_iterations"});
  for (const RegularizedLevel& l : lim.levels)
    csv.row({I(l.n), R(l.energy_sq), R(l.sup), R(l.omega_min), R(l.weak_residual),
             I(l.outer_iterations)});
  ctx.write("singular_q" + qtag(q) + ".csv", csv.text());
  ctx.write("u_hat_q" + qtag(q) + ".txt", two_column(mesh, lim.u_hat));

  ctx.log.check("SF1", lim.max_monotonicity_violation <= 1e-8,
                tag + "max violation " + fmt(lim.max_monotonicity_violation));
  ctx.log.check("SF2", lim.interior_lower_bound > 0.0,
                tag + "beta = " + fmt(lim.interior_lower_bound));
  ctx.log.check("SF3", lim.max_energy_decrease <= 1e-10,
                tag + "max decrease " + fmt(lim.max_energy_decrease));
  const double e_hat = lim.levels.back().energy_sq;
  if (q < 1.0)
    ctx.log.check("SF4", lim.identity_gap <= 1e-6 * e_hat,
                  tag + "relative gap " + fmt(lim.identity_gap / e_hat));
  else
    ctx.log.record("SF4", Status::skip, tag + "global identity requires 0<q<1");

  // Second schedule from the f = 1 solution instead of zero.
  const GridFunction start = solve_linear(ops, GridFunction::Ones(ops.dofs()), ctx.cfg.tolerances.linear).u.cwiseMax(0.0);
  const LevelOptions lo{ctx.cfg.tolerances.outer, 5000};
  const SingularLimit other = run_schedule(ops, ctx.spd(), q, ctx.cfg.n_schedule, lo, &start);
  if (!other.ok()) throw SolverError("second singular schedule failed: " + other.failure, 0.0);
  const double diff = energy_norm(ops, other.u_hat - lim.u_hat);
  ctx.log.check("SF5", diff <= 1e-6, tag + "energy distance " + fmt(diff));

  if (q > 1.0) {
    const TransformedBound tb = transformed_energy_bound(ops, lim.levels, q, 0.01);
    ctx.log.check("SF6", !tb.violated, tag + fmt(tb.max_energy) + " vs bound " + fmt(tb.bound));
  } else {
    ctx.log.record("SF6", Status::skip, tag + "transformed bound applies to q>1");
  }

  const double s_last = lim.levels.back().sup;
  const double s_prev = lim.levels.size() >= 2 ? lim.levels[lim.levels.size() - 2].sup : s_last;
  const double growth = (s_last - s_prev) / s_prev;
  // Literal check over every collar DOF. The DOF next to the constrained node
  // x = b+w carries the discrete boundary layer, so its excess is reported apart.
  double collar_excess = -std::numeric_limits<double>::infinity();
  double inner_excess = -std::numeric_limits<double>::infinity();
  const std::size_t last_collar = ops.dofs() - 1;
  for (const RegularizedLevel& l : lim.levels) {
    double omega_sup = 0.0;
    for (std::size_t i = 0; i < ops.dofs(); ++i)
      if (mesh.dof_region(i) != Region::collar_interior)
        omega_sup = std::max(omega_sup, std::abs(l.u[static_cast<Eigen::Index>(i)]));
    for (std::size_t i = 0; i < ops.dofs(); ++i) {
      if (mesh.dof_region(i) != Region::collar_interior) continue;
      const double excess = std::abs(l.u[static_cast<Eigen::Index>(i)]) - omega_sup;
      collar_excess = std::max(collar_excess, excess);
      if (i != last_collar) inner_excess = std::max(inner_excess, excess);
    }
  }
  ctx.log.check("SF7", growth < 0.01 && collar_excess <= 0.0,
                tag + "last-level sup growth " + fmt(growth) + ", max collar minus Omega sup " +
                    fmt(collar_excess) + " (without the DOF next to x=b+w: " + fmt(inner_excess) + ")");

  int comparison_failures = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  const RegularizedLevel& top = lim.levels.back();
  for (int k = 0; k < 10; ++k) {
    GridFunction delta;
    if (k == 0) delta = GridFunction::Zero(ops.dofs());
    else if (k == 1) delta = GridFunction::Constant(ops.dofs(), 0.1);
    else delta = random_positive(ops.dofs(), ctx.seed(k) * 977u + static_cast<std::uint64_t>(k), 0.0, 1.0);
    const ComparisonResult cr = comparison_check(ops, ctx.spd(), top, delta, 1e-8, lo);
    if (!cr.holds) ++comparison_failures;
    worst_margin = std::min(worst_margin, cr.min_margin);
  }
  ctx.log.check("SF8", comparison_failures == 0,
                tag + "min(v-u) over 10 pairs " + fmt(worst_margin));

  if (q == 1.0) {
    double worst = 0.0;
    for (const RegularizedLevel& l : lim.levels) worst = std::max(worst, l.energy_sq);
    const double omega = ctx.cfg.domain.omega_length();
    ctx.log.check("SF10", worst <= omega + 1e-10, tag + "max eta^2 " + fmt(worst) + " vs |Omega| " + fmt(omega));
  } else {
    ctx.log.record("SF10", Status::skip, tag + "Case-I bound is stated for q=1");
  }
}

void check_algebraic(Context& ctx) {
  std::mt19937_64 gen(ctx.seed() + 1234567u);
  std::uniform_real_distribution<double> xy(0.0, 10.0);
  std::uniform_real_distribution<double> al(0.0, 5.0);
  int violations = 0;
  for (int k = 0; k < 100000; ++k) {
    double alpha = al(gen);
    if (alpha == 0.0) alpha = 5.0;
    if (!algebraic_inequality_check(xy(gen), xy(gen), alpha)) ++violations;
  }
  ctx.log.check("SF9", violations == 0, I(violations) + " violations in 1e5 samples");
}

// ---------------------------------------------------------------- sobolev

RayleighOptions rayleigh_options(Context& ctx) {
  RayleighOptions ro;
  ro.seed = ctx.seed();
  return ro;
}

double sobolev_gap_at(const ExperimentConfig& cfg, const DomainSpec& dom, double q,
                      const RayleighOptions& ro) {
  const OperatorSet ops = assemble(build_mesh(dom), cfg.quad_order);
  const SpdSolver solver(ops.A, cfg.linear_solver, cfg.tolerances.linear);
  const SingularLimit lim =
      run_schedule(ops, solver, q, cfg.n_schedule, LevelOptions{cfg.tolerances.outer, 5000});
  if (!lim.ok()) throw SolverError("refined singular schedule failed: " + lim.failure, 0.0);
  return sobolev_report(ops, solver, lim.u_hat, q, ro, 0).equality_gap;
}

void check_sobolev(Context& ctx, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("sobolev: problem.q must lie in (0,1)");
  const OperatorSet& ops = ctx.operators();
  const std::string tag = "q=" + qtag(q) + ": ";
  ctx.note("sobolev constant " + tag);
  const SingularLimit lim = solve_singular(ctx, q);
  const RayleighOptions ro = rayleigh_options(ctx);
  const SobolevReport rep = sobolev_report(ops, ctx.spd(), lim.u_hat, q, ro, 1000);

  Csv csv({"q", "R_formula", "R_rayleigh", "equality_gap", "argmin_distance", "random_tests",
           "random_test_failures", "sharpness_witness"});
  csv.row({R(q), R(rep.R_formula), R(rep.R_rayleigh), R(rep.equality_gap), R(rep.argmin_distance),
           I(rep.random_tests), I(rep.random_test_failures), rep.sharpness_witness ? "1" : "0"});
  ctx.write("sobolev_q" + qtag(q) + ".csv", csv.text());
  ctx.write("extremal_q" + qtag(q) + ".txt", two_column(ops.mesh, rep.extremal_V));

  int abs_violations = 0;
  for (int k = 0; k < 200; ++k) {
    const GridFunction v = random_signed(ops.dofs(), ctx.seed(k) * 104729u + static_cast<std::uint64_t>(k));
    if (energy_norm_sq(ops, v.cwiseAbs()) > energy_norm_sq(ops, v) * (1.0 + 1e-12)) ++abs_violations;
  }
  ctx.log.check("SL1", abs_violations == 0, tag + I(abs_violations) + " of 200 violate");

  const double cosine = energy_cosine(ops, rep.rayleigh_argmin, rep.extremal_V);
  const InequalitySides eq = inequality_sides(ops, q, rep.R_formula, 3.7 * rep.extremal_V);
  const double eq_gap = std::abs(eq.lhs - eq.rhs) / eq.lhs;
  const bool equality_at_multiple = eq_gap <= 1e-6;
  ctx.log.check("SL2", cosine > 1.0 - 1e-6 && equality_at_multiple,
                tag + "cosine(argmin, V) = 1 - " + fmt(1.0 - cosine) + ", equality gap at 3.7V " + fmt(eq_gap));

  ctx.log.check("SL3", rep.equality_gap <= 0.01 && rep.argmin_distance <= 1e-3,
                tag + "relative gap " + fmt(rep.equality_gap) + ", argmin distance " +
                    fmt(rep.argmin_distance));

  DomainSpec finer = ctx.cfg.domain;
  finer.h /= 2.0;
  const double gap_fine = sobolev_gap_at(ctx.cfg, finer, q, ro);
  const bool shrinks = gap_fine <= rep.equality_gap || (gap_fine <= 1e-6 && rep.equality_gap <= 1e-6);
  ctx.log.check("SL4", shrinks,
                tag + "gap " + fmt(rep.equality_gap) + " -> " + fmt(gap_fine) + " (noise floor 1e-6)");

  ctx.log.check("SL5", rep.random_test_failures == 0 && rep.sharpness_witness,
                tag + I(rep.random_test_failures) + " random failures; sharpness witness " +
                    (rep.sharpness_witness ? "found" : "missing"));
}

// ---------------------------------------------------------------- nehari

struct NehariOutcome {
  std::string csv;
  std::string lambda_csv;
  std::string witness_csv;
};

NehariOutcome run_nehari(Context& ctx, bool record) {
  const OperatorSet& ops = ctx.operators();
  const ExperimentConfig& cfg = ctx.cfg;
  const double q = cfg.q, p = cfg.p;
  PerturbedParams{1.0, q, p}.validate();
  const EigenPair& eig = ctx.eigenpair();
  const GridFunction seed = eig.phi1.cwiseMax(1e-12);

  EmbeddingOptions eo;
  eo.seed = ctx.seed();
  const LambdaStar ls = lambda_star(ops, ctx.spd(), q, p, eo, {seed});
  NehariOutcome out;
  Csv lcsv({"q", "p", "lambda_star", "C_p1", "C_1mq", "lambda1"});
  lcsv.row({R(q), R(p), R(ls.value), R(ls.C_p1.value), R(ls.C_1mq.value), R(eig.lambda1)});
  out.lambda_csv = lcsv.text();

  // Fiber structure on random directions at half the threshold.
  int fiber_bad = 0;
  const PerturbedParams half{0.5 * ls.value, q, p};
  for (int k = 0; k < 50; ++k) {
    const GridFunction u = random_positive(ops.dofs(), ctx.seed(k) * 7u + 1000u + static_cast<std::uint64_t>(k));
    try {
      const FiberMapReport fr = fiber_analyze(ops, u, half);
      const bool ok = fr.t_star < fr.t_max && fr.t_max < fr.t_star_upper &&
                      std::abs(fr.phi_d_at_t_star) <= 1e-8 * fr.eta_sq &&
                      std::abs(fr.phi_d_at_t_upper) <= 1e-8 * fr.eta_sq &&
                      fr.phi_dd_at_t_star > 0.0 && fr.phi_dd_at_t_upper < 0.0;
      if (!ok) ++fiber_bad;
    } catch (const ProjectionError&) {
      ++fiber_bad;
    }
  }
  if (record) ctx.log.check("NL1", fiber_bad == 0, I(fiber_bad) + " of 50 random directions fail");

  std::vector<double> lambdas;
  if (cfg.lambda) lambdas.push_back(*cfg.lambda);
  else for (double f : cfg.lambda_factors) lambdas.push_back(f * ls.value);

  const NehariOptions no{cfg.tolerances.nehari, 5000};
  Csv csv({"lambda", "q", "p", "branch", "converged", "J", "residual", "eta", "sup", "omega_min",
           "barrier_margin", "phi_dd_at_one", "iterations"});
  const Coercivity co = coercivity_constants(PerturbedParams{1.0, q, p}, ls.C_1mq.value);
  for (double lambda : lambdas) {
    const PerturbedParams prm{lambda, q, p};
    const Barrier bar = barrier(ops, prm, eig);
    const NehariPair pair = nehari_pair(ops, ctx.spd(), prm, seed, no);
    const std::string tag = "lambda=" + fmt(lambda) + ": ";
    for (const NehariRun* run : {&pair.plus, &pair.minus}) {
      const double margin = run->u.size() ? (run->u - bar.f).minCoeff() : std::nan("");
      csv.row({R(lambda), R(q), R(p), branch_name(run->branch), run->converged ? "1" : "0",
               R(run->J), R(run->residual), R(run->eta), R(run->sup), R(run->omega_min), R(margin),
               R(run->phi_dd_at_one), I(run->iterations)});
      if (!record) continue;
      if (run->converged)
        ctx.log.check("NL2", std::abs(run->phi_dd_at_one) > 1e-8 * run->eta * run->eta,
                      tag + branch_name(run->branch) + " Phi''(1) = " + fmt(run->phi_dd_at_one));
      ctx.log.check("NL6", run->converged && margin >= -1e-6,
                    tag + branch_name(run->branch) + " margin " + fmt(margin));
    }
    if (!record) continue;
    const bool both = pair.plus.converged && pair.minus.converged;
    ctx.log.check("NL5",
                  both && pair.plus.residual <= 1e-6 && pair.minus.residual <= 1e-6 &&
                      pair.plus.J < 0.0 && pair.separation > 1e3 * no.tol,
                  tag + "J+ " + fmt(pair.plus.J) + ", J- " + fmt(pair.minus.J) + ", separation " +
                      fmt(pair.separation) + (both ? "" : ", failure: " + pair.plus.failure + pair.minus.failure));
    ctx.log.check("NL3", both && std::isfinite(pair.plus.eta) && pair.minus.eta > 1e-6,
                  tag + "eta+ " + fmt(pair.plus.eta) + ", eta- " + fmt(pair.minus.eta));
    double worst = std::numeric_limits<double>::infinity();
    const double B = co.B * lambda;
    for (std::size_t k = 0; k < pair.plus.J_history.size(); ++k) {
      const double e = pair.plus.eta_history[k];
      const double J = pair.plus.J_history[k];
      worst = std::min(worst, J - (co.A * e * e - B * std::pow(e, 1.0 - q)) + 1e-12 * std::abs(J));
    }
    ctx.log.check("NL4", worst >= 0.0, tag + "min slack " + fmt(worst));
  }
  out.csv = csv.text();

  const FinitenessWitness w = lambda_finiteness_witness(ops, ctx.spd(), q, p, eig, no);
  Csv wcsv({"mu_star", "lambda_tested", "nonexistence_observed", "detail"});
  std::string detail = w.detail;
  std::replace(detail.begin(), detail.end(), ',', ';');
  wcsv.row({R(w.mu_star), R(w.lambda_tested), w.nonexistence_observed ? "1" : "0", "\"" + detail + "\""});
  out.witness_csv = wcsv.text();
  if (record)
    ctx.log.check("NL7", w.nonexistence_observed,
                  "mu* " + fmt(w.mu_star) + " (lambda* " + fmt(ls.value) + "): " + w.detail);
  return out;
}

void check_nehari(Context& ctx, bool reproducibility) {
  ctx.note("nehari sweep q=" + qtag(ctx.cfg.q) + " p=" + qtag(ctx.cfg.p));
  const NehariOutcome a = run_nehari(ctx, true);
  ctx.write("nehari.csv", a.csv);
  ctx.write("lambda_star.csv", a.lambda_csv);
  ctx.write("nehari_witness.csv", a.witness_csv);
  if (reproducibility) {
    const NehariOutcome b = run_nehari(ctx, false);
    ctx.log.check("EX1", a.csv == b.csv && a.lambda_csv == b.lambda_csv && a.witness_csv == b.witness_csv,
                  "nehari sweep repeated with identical seeds");
  }
}

// ---------------------------------------------------------------- commands

std::vector<std::string> ids_of(std::initializer_list<const char*> modules) {
  std::vector<std::string> out;
  for (const InvariantInfo& info : invariant_catalog())
    for (const char* m : modules)
      if (info.module == m) out.push_back(info.id);
  return out;
}

void write_manifest(Context& ctx, const std::vector<std::string>& covered) {
  std::vector<std::string> missing;
  for (const std::string& id : covered)
    if (id != "EX2" && !ctx.log.has(id)) missing.push_back(id);
  std::string detail = missing.empty() ? "all " + I(static_cast<long long>(covered.size())) + " covered invariants reported" : "missing:";
  for (const auto& id : missing) detail += " " + id;
  ctx.log.check("EX2", missing.empty(), detail);

  nlohmann::ordered_json j;
  j["command"] = ctx.command;
  j["config_hash"] = config_hash(ctx.cfg);
  j["config"] = canonical_config(ctx.cfg);
  j["modules"] = {{"domain_mesh", "1.0"}, {"operators", "1.0"},  {"elliptic_core", "1.0"},
                  {"singular_flow", "1.0"}, {"sobolev_lab", "1.0"}, {"nehari_lab", "1.0"},
                  {"experiment_cli", "1.0"}};
  j["seed_offset"] = ctx.opt.seed_offset;
  j["outputs"] = std::vector<std::string>(ctx.outputs.begin(), ctx.outputs.end());
  nlohmann::ordered_json inv = nlohmann::ordered_json::array();
  int counts[3] = {0, 0, 0};
  for (const InvariantInfo& info : invariant_catalog()) {
    const bool ran = ctx.log.has(info.id);
    const Status st = ran ? ctx.log.at(info.id).status : Status::skip;
    const std::string det = ran ? ctx.log.at(info.id).detail : "not part of '" + ctx.command + "'";
    ++counts[static_cast<int>(st)];
    inv.push_back({{"id", info.id}, {"module", info.module}, {"description", info.description},
                   {"status", status_name(st)}, {"detail", det}});
  }
  j["invariants"] = inv;
  j["summary"] = {{"pass", counts[0]}, {"fail", counts[1]}, {"skip", counts[2]}};
  j["result"] = ctx.log.any_failed() ? "fail" : "pass";
  ctx.outputs.insert("manifest.json");
  ctx.write("manifest.json", j.dump(2) + "\n");
}

}  // namespace

CommandResult run_command(const std::string& command, const ExperimentConfig& cfg,
                          const RunOptions& opt) {
  CommandResult result;
  Context ctx(cfg, opt, command);
  std::vector<std::string> covered;
  try {
    cfg.validate();
    if (command == "assemble") {
      covered = ids_of({"domain_mesh", "operators", "elliptic_core"});
      check_domain(ctx);
      check_operators(ctx);
      check_elliptic(ctx);
      ctx.write("A_loc.txt", [&] { std::ostringstream s; write_triplets(s, ctx.operators().A_loc); return s.str(); }());
      ctx.write("A_nl.txt", [&] { std::ostringstream s; write_triplets(s, ctx.operators().A_nl); return s.str(); }());
      ctx.write("M_omega.txt", [&] { std::ostringstream s; write_triplets(s, ctx.operators().M_omega); return s.str(); }());
      ctx.write("M_full.txt", [&] { std::ostringstream s; write_triplets(s, ctx.operators().M_full); return s.str(); }());
    } else if (command == "singular") {
      covered = ids_of({"singular_flow"});
      check_singular(ctx, cfg.q);
      check_algebraic(ctx);
    } else if (command == "sobolev") {
      if (!(cfg.q > 0.0 && cfg.q < 1.0)) throw ConfigError("sobolev: problem.q must lie in (0,1)");
      covered = ids_of({"sobolev_lab"});
      check_sobolev(ctx, cfg.q);
    } else if (command == "nehari") {
      covered = ids_of({"nehari_lab"});
      check_nehari(ctx, false);
    } else if (command == "verify") {
      covered = ids_of({"domain_mesh", "operators", "elliptic_core", "singular_flow",
                        "sobolev_lab", "nehari_lab", "experiment_cli"});
      check_domain(ctx);
      check_operators(ctx);
      check_elliptic(ctx);
      for (double q : cfg.verify_q_singular) check_singular(ctx, q);
      check_algebraic(ctx);
      for (double q : cfg.verify_q_sobolev) check_sobolev(ctx, q);
      check_nehari(ctx, true);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    covered.push_back("EX2");
    write_manifest(ctx, covered);
    result.manifest_path = (ctx.out_dir / "manifest.json").string();
    result.exit_code = ctx.log.any_failed() ? 2 : 0;
    result.message = ctx.log.any_failed() ? "invariant failure" : "all invariants passed";
  } catch (const ConfigError& e) {
    result.exit_code = 1;
    result.message = e.what();
  } catch (const SolverError& e) {
    result.exit_code = 3;
    result.message = e.what();
  } catch (const ProjectionError& e) {
    result.exit_code = 3;
    result.message = e.what();
  } catch (const std::exception& e) {
    result.exit_code = 3;
    result.message = std::string("unexpected error: ") + e.what();
  }
  return result;
}

CommandResult run_command_file(const std::string& command, const std::string& config_path,
                               const RunOptions& opt) {
  try {
    const ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    return run_command(command, cfg, opt);
  } catch (const ConfigError& e) {
    CommandResult r;
    r.exit_code = 1;
    r.message = e.what();
    return r;
  }
}

}  // namespace mixlab
