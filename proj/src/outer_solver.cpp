// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/outer_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace c2dfb {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::c2dfb: return "c2dfb";
    case Variant::naive: return "naive";
    case Variant::uncompressed: return "uncompressed";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "c2dfb") return Variant::c2dfb;
  if (name == "naive" || name == "nc") return Variant::naive;
  if (name == "uncompressed") return Variant::uncompressed;
  throw InvalidConfigError("unknown variant '" + name + "' (expected c2dfb, naive or uncompressed)");
}

std::vector<std::string> RunConfig::validation_errors() const {
  std::vector<std::string> errs;
  auto positive = [&](const char* key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) errs.push_back(std::string("schedule.") + key + ": must be positive");
  };
  positive("eta_in", eta_in);
  if (eta_in_y) positive("eta_in_y", *eta_in_y);
  if (!(eta_out >= 0.0) || !std::isfinite(eta_out)) errs.push_back("schedule.eta_out: must be non-negative");
  if (!(gamma_in > 0.0 && gamma_in <= 1.0)) errs.push_back("schedule.gamma_in: must lie in (0, 1]");
  if (!(gamma_out > 0.0 && gamma_out <= 1.0)) errs.push_back("schedule.gamma_out: must lie in (0, 1]");
  positive("lambda", lambda);
  if (K < 1) errs.push_back("schedule.K: must be >= 1");
  if (T < 0) errs.push_back("schedule.T: must be >= 0");
  if (epsilon) positive("epsilon", *epsilon);
  if (target_grad_norm) positive("target_grad_norm", *target_grad_norm);
  return errs;
}

void RunConfig::validate() const {
  const auto errs = validation_errors();
  if (errs.empty()) return;
  std::ostringstream os;
  os << "invalid run configuration:";
  for (const auto& e : errs) os << "\n  " << e;
  throw InvalidConfigError(os.str());
}

namespace {

InnerScheme scheme_of(const RunConfig& cfg) {
  return cfg.variant == Variant::naive ? InnerScheme::naive : InnerScheme::reference_point;
}

Compressor compressor_of(const RunConfig& cfg) {
  return cfg.variant == Variant::uncompressed ? Compressor::identity() : cfg.compressor;
}

InnerParams inner_params(const RunConfig& cfg, InnerObjective which) {
  InnerParams p;
  p.gamma = cfg.gamma_in;
  p.eta = which == InnerObjective::penalized ? cfg.effective_eta_in_y() : cfg.eta_in;
  p.iterations = cfg.K;
  p.compressor = compressor_of(cfg);
  p.scheme = scheme_of(cfg);
  p.channel = which == InnerObjective::penalized ? Channel::inner_y : Channel::inner_z;
  p.audit = cfg.audit;
  return p;
}

void check_finite_stack(const Stack& s, const char* what, int round) {
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    if (!s.row(i).allFinite())
      throw NumericError(std::string("outer solver: non-finite ") + what + " at node " + std::to_string(i) +
                         ", round " + std::to_string(round));
}

double max_abs(const Eigen::RowVectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void merge(InnerAudit& into, const InnerAudit& a) {
  into.mean_update = std::max(into.mean_update, a.mean_update);
  into.tracking = std::max(into.tracking, a.tracking);
  into.aggregate = std::max(into.aggregate, a.aggregate);
}

void merge(OuterAudit& into, const OuterAudit& a) {
  into.mean_update = std::max(into.mean_update, a.mean_update);
  into.tracking = std::max(into.tracking, a.tracking);
  merge(into.inner, a.inner);
}

Stack hypergradients(const BilevelProblem& problem, const Stack& x, const Stack& y, const Stack& z, double lambda) {
  Stack u(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    u.row(i) = hypergradient_estimate(problem, i, row_of(x, i), row_of(y, i), row_of(z, i), lambda).transpose();
  return u;
}

}  // namespace

OuterState initialize(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w,
                      PayloadLedger& ledger) {
  cfg.validate();
  const int m = problem.node_count();
  if (w.node_count() != m)
    throw InvalidConfigError("topology has " + std::to_string(w.node_count()) + " nodes but the problem has " +
                             std::to_string(m));
  OuterState st;
  st.x.resize(m, problem.dim_x());
  Stack y0(m, problem.dim_y());
  const std::uint64_t init_seed = derive_seed(cfg.seed, "init");
  for (int i = 0; i < m; ++i) {
    auto [x0, yi] = problem.initial_point(i, init_seed);
    st.x.row(i) = x0.transpose();
    y0.row(i) = yi.transpose();
  }
  const Stack z0 = y0;
  st.u = hypergradients(problem, st.x, y0, z0, cfg.lambda);
  st.s = st.u;

  InnerInitOptions oy{Channel::inner_y, scheme_of(cfg), derive_seed(cfg.seed, "compressor", 0)};
  InnerInitOptions oz{Channel::inner_z, scheme_of(cfg), derive_seed(cfg.seed, "compressor", 1)};
  st.y = inner_init(InnerObjectiveFn(problem, InnerObjective::penalized, cfg.lambda, st.x), y0, w, nullptr, oy,
                    &ledger);
  st.z = inner_init(InnerObjectiveFn(problem, InnerObjective::lower, cfg.lambda, st.x), z0, w, nullptr, oz, &ledger);
  st.t = 0;
  return st;
}

OuterStepReport outer_step(OuterState& st, const BilevelProblem& problem, const MixingMatrix& w,
                           const RunConfig& cfg, PayloadLedger& ledger) {
  const int m = st.nodes();
  const int dx = static_cast<int>(st.x.cols());
  OuterStepReport rep;

  // x exchange, uncompressed.
  const Eigen::RowVectorXd x_bar_old = st.x.colwise().mean();
  const Eigen::RowVectorXd s_bar_old = st.s.colwise().mean();
  const Stack wx = mix(w, st.x);
  for (int i = 0; i < m; ++i) ledger.record(Channel::outer, i, static_cast<Words>(dx));
  Stack x_new = st.x + cfg.gamma_out * (wx - st.x) - cfg.eta_out * st.s;
  check_finite_stack(x_new, "x", st.t);

  try {
    const InnerObjectiveFn hy(problem, InnerObjective::penalized, cfg.lambda, x_new);
    const InnerObjectiveFn gz(problem, InnerObjective::lower, cfg.lambda, x_new);
    const InnerInitOptions oy{Channel::inner_y, scheme_of(cfg), 0};
    const InnerInitOptions oz{Channel::inner_z, scheme_of(cfg), 0};
    st.y = inner_init(hy, st.y.d, w, &st.y, oy, &ledger);
    rep.y = inner_run(st.y, hy, w, inner_params(cfg, InnerObjective::penalized), &ledger);
    st.z = inner_init(gz, st.z.d, w, &st.z, oz, &ledger);
    rep.z = inner_run(st.z, gz, w, inner_params(cfg, InnerObjective::lower), &ledger);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + " (outer round " + std::to_string(st.t) + ")");
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (outer round " + std::to_string(st.t) + ")");
  }

  const Stack u_new = hypergradients(problem, x_new, st.y.d, st.z.d, cfg.lambda);
  check_finite_stack(u_new, "hypergradient estimate", st.t);

  // s_x exchange, uncompressed.
  const Stack ws = mix(w, st.s);
  for (int i = 0; i < m; ++i) ledger.record(Channel::outer, i, static_cast<Words>(dx));
  st.s = st.s + cfg.gamma_out * (ws - st.s) + u_new - st.u;
  st.u = u_new;
  st.x = std::move(x_new);
  ++st.t;

  if (cfg.audit) {
    rep.audit.mean_update = max_abs(st.x.colwise().mean() - (x_bar_old - cfg.eta_out * s_bar_old));
    rep.audit.tracking = max_abs(st.s.colwise().mean() - st.u.colwise().mean());
    merge(rep.audit.inner, rep.y.worst_audit);
    merge(rep.audit.inner, rep.z.worst_audit);
  }
  return rep;
}

namespace {

RoundLog make_row(const OuterState& st, const BilevelProblem& problem, const RunConfig& cfg,
                  const PayloadLedger& ledger, double seconds) {
  RoundLog row;
  row.t = st.t;
  row.payload_outer = ledger.total(Channel::outer);
  row.payload_inner_y = ledger.total(Channel::inner_y);
  row.payload_inner_z = ledger.total(Channel::inner_z);
  row.wall_seconds = cfg.wall_clock ? seconds : 0.0;
  row.diag = snapshot(st, problem, cfg);
  row.task = problem.node_averaged_task_metrics(st.x, st.y.d);
  return row;
}

RunResult run_impl(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w,
                   const RoundSink& sink) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  RunResult res{OuterState{}, {}, PayloadLedger(cfg.keep_message_records), {}, std::nullopt, false};
  res.final_state = initialize(cfg, problem, w, res.ledger);
  auto emit = [&](RoundLog row) {
    if (sink) sink(row);
    res.log.push_back(std::move(row));
  };
  emit(make_row(res.final_state, problem, cfg, res.ledger, elapsed()));
  auto reached = [&](const RoundLog& row) {
    return cfg.target_grad_norm && row.diag.grad_norm_oracle && *row.diag.grad_norm_oracle <= *cfg.target_grad_norm;
  };
  if (reached(res.log.back())) {
    res.stopped_early = true;
    return res;
  }
  for (int t = 0; t < cfg.T; ++t) {
    OuterStepReport rep = outer_step(res.final_state, problem, w, cfg, res.ledger);
    merge(res.worst_audit, rep.audit);
    res.last_step = std::move(rep);
    emit(make_row(res.final_state, problem, cfg, res.ledger, elapsed()));
    if (reached(res.log.back())) {
      res.stopped_early = true;
      break;
    }
  }
  return res;
}

}  // namespace

RunResult run(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w, const RoundSink& sink) {
  return run_impl(cfg, problem, w, sink);
}

RunResult run_naive_variant(const RunConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w,
                            const RoundSink& sink) {
  RunConfig naive = cfg;
  naive.variant = Variant::naive;
  return run_impl(naive, problem, w, sink);
}

}  // namespace c2dfb
