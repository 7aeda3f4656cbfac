// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace c2dfb {

InnerObjectiveFn::InnerObjectiveFn(const BilevelProblem& problem, InnerObjective which, double lambda, Stack x)
    : problem_(&problem), which_(which), lambda_(lambda), x_(std::move(x)) {
  if (x_.rows() != problem.node_count() || x_.cols() != problem.dim_x())
    throw ShapeError("inner objective: stacked x must be " + std::to_string(problem.node_count()) + " x " +
                     std::to_string(problem.dim_x()));
}

Vec InnerObjectiveFn::gradient(int node, const Vec& d) const {
  return problem_->inner_gradient(which_, lambda_, node, row_of(x_, node), d);
}

double InnerObjectiveFn::value(int node, const Vec& d) const {
  return problem_->inner_value(which_, lambda_, node, row_of(x_, node), d);
}

std::optional<Vec> InnerObjectiveFn::optimum() const {
  const ExactOracles* o = problem_->oracles();
  if (o == nullptr) return std::nullopt;
  return o->inner_optimum(which_, x_, lambda_);
}

Stack mix(const MixingMatrix& w, const Stack& v) {
  const auto m = v.rows();
  if (w.weights.rows() != m) throw ShapeError("mix: mixing matrix and stack disagree on node count");
  Stack out = Stack::Zero(m, v.cols());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double wij = w.weights(i, j);
      if (wij != 0.0) out.row(i) += wij * v.row(j);
    }
  return out;
}

namespace {

std::span<const double> row_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::span<double> row_span(Stack& s, Eigen::Index i) {
  return {s.row(i).data(), static_cast<std::size_t>(s.cols())};
}

void check_finite(const Vec& g, int node, int step) {
  if (!g.allFinite())
    throw NumericError("inner solver: non-finite gradient at node " + std::to_string(node) + ", step " +
                       std::to_string(step));
}

Stack all_gradients(const InnerObjectiveFn& r, const Stack& d, int step) {
  Stack g(d.rows(), d.cols());
  for (int i = 0; i < d.rows(); ++i) {
    const Vec gi = r.gradient(i, row_of(d, i));
    check_finite(gi, i, step);
    g.row(i) = gi.transpose();
  }
  return g;
}

// d_i + gamma (sum_j w_ij ref_j - ref_i) - eta s_i, shared by both schemes.
Eigen::RowVectorXd gossip_update(const Stack& d, const Stack& agg, const Stack& ref, const Stack& s, Eigen::Index i,
                                 double gamma, double eta) {
  return d.row(i) + gamma * (agg.row(i) - ref.row(i)) - eta * s.row(i);
}

Eigen::RowVectorXd tracker_update(const Stack& s, const Stack& agg, const Stack& ref, const Stack& g_new,
                                  const Stack& g_old, Eigen::Index i, double gamma) {
  return s.row(i) + gamma * (agg.row(i) - ref.row(i)) + g_new.row(i) - g_old.row(i);
}

double max_abs(const Eigen::RowVectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

InnerState inner_init(const InnerObjectiveFn& r, const Stack& d0, const MixingMatrix& w, const InnerState* carried,
                      const InnerInitOptions& opt, PayloadLedger* ledger) {
  const int m = r.nodes();
  const int dim = r.dim();
  if (d0.rows() != m || d0.cols() != dim)
    throw ShapeError("inner_init: models must be " + std::to_string(m) + " x " + std::to_string(dim));
  if (w.node_count() != m) throw ShapeError("inner_init: mixing matrix has wrong node count");

  if (carried != nullptr) {
    const InnerState& c = *carried;
    auto same = [&](const Stack& s) { return s.rows() == m && s.cols() == dim; };
    if (!same(c.s) || !same(c.grad) || static_cast<int>(c.rngs.size()) != m ||
        (opt.scheme == InnerScheme::reference_point &&
         (!same(c.d_ref) || !same(c.s_ref) || !same(c.d_ref_agg) || !same(c.s_ref_agg))) ||
        (opt.scheme == InnerScheme::naive && (!same(c.d_err) || !same(c.s_err))))
      throw ShapeError("inner_init: carried references do not match " + std::to_string(m) + " x " +
                       std::to_string(dim));
    InnerState st = c;
    st.d = d0;
    const Stack g_new = all_gradients(r, st.d, st.steps_taken);
    st.s += g_new - st.grad;
    st.grad = g_new;
    return st;
  }

  InnerState st;
  st.d = d0;
  st.grad = all_gradients(r, st.d, 0);
  st.s = st.grad;
  st.rngs.reserve(m);
  for (int i = 0; i < m; ++i) st.rngs.push_back(make_rng(opt.rng_seed, "inner-compressor", i));
  if (opt.scheme == InnerScheme::reference_point) {
    st.d_ref = st.d;
    st.s_ref = st.s;
    st.d_ref_agg = mix(w, st.d_ref);
    st.s_ref_agg = mix(w, st.s_ref);
    if (ledger != nullptr)
      for (int i = 0; i < m; ++i) {
        ledger->record(opt.channel, i, static_cast<Words>(dim));
        ledger->record(opt.channel, i, static_cast<Words>(dim));
      }
  } else {
    st.d_err = Stack::Zero(m, dim);
    st.s_err = Stack::Zero(m, dim);
  }
  return st;
}

InnerStepRecord inner_snapshot(const InnerState& st, const std::optional<Vec>& optimum) {
  InnerStepRecord rec;
  if (st.d_ref.size() > 0) {
    rec.compression_error = (st.d - st.d_ref).squaredNorm();
    rec.tracker_compression_error = (st.s - st.s_ref).squaredNorm();
  } else if (st.d_err.size() > 0) {
    rec.compression_error = st.d_err.squaredNorm();
    rec.tracker_compression_error = st.s_err.squaredNorm();
  }
  rec.consensus_error = consensus_error(st.d);
  rec.tracker_consensus_error = consensus_error(st.s);
  if (optimum) rec.optimality_gap = (node_mean(st.d) - *optimum).squaredNorm();
  return rec;
}

InnerStepRecord inner_step(InnerState& st, const InnerObjectiveFn& r, const MixingMatrix& w, const InnerParams& p,
                           PayloadLedger* ledger) {
  const int m = st.nodes();
  const int dim = st.dim();
  const int step = st.steps_taken;
  const bool lossless = p.compressor.lossless();
  Words words = 0;

  const Eigen::RowVectorXd d_bar_old = st.d.colwise().mean();
  const Eigen::RowVectorXd s_bar_old = st.s.colwise().mean();

  Stack d_new(m, dim), s_new(m, dim), g_new(m, dim);

  auto send = [&](const CompressedVector& msg, int node) {
    words += msg.payload_words;
    if (ledger != nullptr) ledger->record(p.channel, node, msg.payload_words);
  };

  if (p.scheme == InnerScheme::reference_point) {
    std::vector<CompressedVector> msg_d(m), msg_s(m);
    for (int i = 0; i < m; ++i) {
      d_new.row(i) = gossip_update(st.d, st.d_ref_agg, st.d_ref, st.s, i, p.gamma, p.eta);
      const Vec gi = r.gradient(i, row_of(d_new, i));
      check_finite(gi, i, step);
      g_new.row(i) = gi.transpose();
      s_new.row(i) = tracker_update(st.s, st.s_ref_agg, st.s_ref, g_new, st.grad, i, p.gamma);
      const Vec rd = (d_new.row(i) - st.d_ref.row(i)).transpose();
      msg_d[i] = compress(p.compressor, row_span(rd), &st.rngs[i]);
      send(msg_d[i], i);
      const Vec rs = (s_new.row(i) - st.s_ref.row(i)).transpose();
      msg_s[i] = compress(p.compressor, row_span(rs), &st.rngs[i]);
      send(msg_s[i], i);
    }
    if (lossless) {
      // A lossless residual reconstructs the model exactly.
      st.d_ref = d_new;
      st.s_ref = s_new;
      st.d_ref_agg = mix(w, st.d_ref);
      st.s_ref_agg = mix(w, st.s_ref);
    } else {
      for (int i = 0; i < m; ++i) {
        accumulate(msg_d[i], 1.0, row_span(st.d_ref, i));
        accumulate(msg_s[i], 1.0, row_span(st.s_ref, i));
      }
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          const double wij = w.weights(i, j);
          if (wij == 0.0) continue;
          accumulate(msg_d[j], wij, row_span(st.d_ref_agg, i));
          accumulate(msg_s[j], wij, row_span(st.s_ref_agg, i));
        }
      }
    }
  } else {
    // Each node sends Q(d_i + e_i) and keeps the residual as its new error.
    Stack cd(m, dim), cs(m, dim);
    for (int i = 0; i < m; ++i) {
      const Vec vd = (st.d.row(i) + st.d_err.row(i)).transpose();
      const CompressedVector md = compress(p.compressor, row_span(vd), &st.rngs[i]);
      send(md, i);
      cd.row(i) = decompress(md).transpose();
      st.d_err.row(i) = vd.transpose() - cd.row(i);
      const Vec vs = (st.s.row(i) + st.s_err.row(i)).transpose();
      const CompressedVector ms = compress(p.compressor, row_span(vs), &st.rngs[i]);
      send(ms, i);
      cs.row(i) = decompress(ms).transpose();
      st.s_err.row(i) = vs.transpose() - cs.row(i);
    }
    const Stack agg_d = mix(w, cd);
    const Stack agg_s = mix(w, cs);
    for (int i = 0; i < m; ++i) {
      d_new.row(i) = gossip_update(st.d, agg_d, cd, st.s, i, p.gamma, p.eta);
      const Vec gi = r.gradient(i, row_of(d_new, i));
      check_finite(gi, i, step);
      g_new.row(i) = gi.transpose();
      s_new.row(i) = tracker_update(st.s, agg_s, cs, g_new, st.grad, i, p.gamma);
    }
  }

  st.d = std::move(d_new);
  st.s = std::move(s_new);
  st.grad = std::move(g_new);
  ++st.steps_taken;

  InnerStepRecord rec = inner_snapshot(st, std::nullopt);
  rec.payload_words = words;
  if (p.audit) {
    const Eigen::RowVectorXd d_bar = st.d.colwise().mean();
    rec.audit.mean_update = max_abs(d_bar - (d_bar_old - p.eta * s_bar_old));
    rec.audit.tracking = max_abs(st.s.colwise().mean() - st.grad.colwise().mean());
    if (p.scheme == InnerScheme::reference_point) {
      rec.audit.aggregate = std::max((st.d_ref_agg - mix(w, st.d_ref)).cwiseAbs().maxCoeff(),
                                     (st.s_ref_agg - mix(w, st.s_ref)).cwiseAbs().maxCoeff());
    }
  }
  return rec;
}

InnerReport inner_run(InnerState& st, const InnerObjectiveFn& r, const MixingMatrix& w, const InnerParams& p,
                      PayloadLedger* ledger) {
  if (p.iterations < 1) throw InvalidConfigError("inner loop needs K >= 1 iterations");
  const std::optional<Vec> optimum = r.optimum();
  InnerReport report;
  report.steps.reserve(p.iterations);
  std::vector<double> gaps;
  for (int k = 0; k < p.iterations; ++k) {
    InnerStepRecord rec = inner_step(st, r, w, p, ledger);
    if (optimum) {
      rec.optimality_gap = (node_mean(st.d) - *optimum).squaredNorm();
      const double gap = *rec.optimality_gap;
      if (!std::isfinite(gap))
        throw NumericError("inner solver: optimality gap became non-finite at step " + std::to_string(k));
      if (k >= 20) {
        const double past = *std::max_element(gaps.begin(), gaps.end() - 19);
        if (gap > 1e-12 && gap > 10.0 * past)
          throw DivergenceError("inner solver diverging: gap " + std::to_string(gap) + " at step " +
                                std::to_string(k) + " exceeds 10x its level 20 steps earlier; reduce eta_in");
      }
      gaps.push_back(gap);
    }
    report.payload_words += rec.payload_words;
    report.worst_audit.mean_update = std::max(report.worst_audit.mean_update, rec.audit.mean_update);
    report.worst_audit.tracking = std::max(report.worst_audit.tracking, rec.audit.tracking);
    report.worst_audit.aggregate = std::max(report.worst_audit.aggregate, rec.audit.aggregate);
    report.steps.push_back(std::move(rec));
  }
  report.iterations = p.iterations;
  return report;
}

}  // namespace c2dfb
