#include "capstone/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "capstone/predict.hpp"
#include "capstone/solvers.hpp"

namespace capstone {

namespace {

constexpr const char* kLeakEvent = "(leakage)";

void FitOptionsCheck(const FitOptions& o) { o.validate(); }

OperatingPoint common_op(const std::vector<ActivitySample>& samples) {
  const OperatingPoint op = samples.front().report.op;
  for (const auto& s : samples) {
    if (!(s.report.op == op)) {
      throw RejectedInput("fit: samples span multiple operating points; "
                          "train one model per point");
    }
  }
  return op;
}

// Internal dense view of an aligned dataset, with an optional constant-count
// pseudo-event carrying the leakage term (always the last column index).
struct FitState {
  std::vector<std::string> event_names;  // without the pseudo-event
  std::vector<std::string> row_paths;
  Eigen::MatrixXd X;  // E_int x K
  Eigen::MatrixXd Y;  // R x K
  Eigen::MatrixXd W;  // R x E_int
  Eigen::VectorXd alpha;
  bool has_leak = false;
  OperatingPoint op;

  Eigen::Index num_internal_events() const { return X.rows(); }
};

FitState build_state(const AlignedDataset& aligned, bool fit_leakage,
                     const OperatingPoint& op) {
  FitState st;
  st.event_names = aligned.event_names;
  st.row_paths = aligned.row_paths;
  st.op = op;
  st.has_leak = fit_leakage;
  for (const auto& n : st.event_names) {
    if (n == kLeakEvent) {
      throw RejectedInput(std::string("fit: event name '") + kLeakEvent +
                          "' is reserved");
    }
  }
  const auto E = static_cast<Eigen::Index>(st.event_names.size());
  const auto R = static_cast<Eigen::Index>(st.row_paths.size());
  const auto K = static_cast<Eigen::Index>(aligned.samples.size());
  if (E == 0 || R == 0) throw RejectedInput("fit: need E >= 1 and R >= 1");

  const Eigen::Index Ei = E + (fit_leakage ? 1 : 0);
  st.X.setZero(Ei, K);
  st.Y.setZero(R, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& s = aligned.samples[k];
    for (Eigen::Index e = 0; e < E; ++e) st.X(e, k) = s.events.counts[e];
    if (fit_leakage) st.X(Ei - 1, k) = 1.0;
    for (Eigen::Index r = 0; r < R; ++r) st.Y(r, k) = s.report.rows[r].power_mw;
  }
  return st;
}

double state_objective(const FitState& st, const FitOptions& o) {
  const Eigen::MatrixXd resid =
      st.Y - st.W * st.alpha.asDiagonal() * st.X;
  return resid.squaredNorm() + o.lambda_w * st.W.cwiseAbs().sum() +
         o.lambda_alpha * st.alpha.squaredNorm();
}

// One outer iteration: W rows by NNLS (alpha fixed), then alpha by
// nonnegative ridge (W fixed). Each block is solved to optimality, so the
// objective cannot increase.
void outer_iteration(FitState& st, const FitOptions& o) {
  const Eigen::Index Ei = st.num_internal_events();
  const Eigen::Index R = st.Y.rows();
  const Eigen::Index K = st.Y.cols();

  // W block: row r sees the K x Ei design Z(k,e) = alpha_e X_ek.
  const Eigen::MatrixXd Z =
      (st.alpha.asDiagonal() * st.X).transpose();
  if (Z.cwiseAbs().maxCoeff() > 0) {
    for (Eigen::Index r = 0; r < R; ++r) {
      st.W.row(r) =
          nnls_solve(Z, st.Y.row(r).transpose(), o.lambda_w).transpose();
    }
  }

  // alpha block: stacked (K*R) x Ei design D[(k,r),e] = W_re X_ek.
  Eigen::MatrixXd D(K * R, Ei);
  Eigen::VectorXd y(K * R);
  for (Eigen::Index k = 0; k < K; ++k) {
    D.middleRows(k * R, R) = st.W * st.X.col(k).asDiagonal();
    y.segment(k * R, R) = st.Y.col(k);
  }
  st.alpha = ridge_nonneg_solve(D, y, o.lambda_alpha);
}

EnergyModel finalize_state(const FitState& st, ModelKind kind) {
  EnergyModel m;
  m.event_names = st.event_names;
  m.row_paths = st.row_paths;
  m.train_op = st.op;
  m.kind = kind;
  const auto E = static_cast<Eigen::Index>(st.event_names.size());
  if (st.has_leak) {
    m.leak_mw = st.alpha(E) * st.W.col(E).sum();
    m.W = st.W.leftCols(E);
    m.alpha = st.alpha.head(E);
  } else {
    m.leak_mw = 0.0;
    m.W = st.W;
    m.alpha = st.alpha;
  }
  return rescale_columns(std::move(m));
}

double mean_abs_pct_err(const std::vector<double>& pred,
                        const std::vector<double>& truth) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::abs(pred[i] - truth[i]) / truth[i];
  }
  return 100.0 * acc / static_cast<double>(pred.size());
}

}  // namespace

void FitOptions::validate() const {
  if (lambda_w < 0 || lambda_alpha < 0) {
    throw RejectedInput("FitOptions: negative regularization weight");
  }
  if (!(rel_tol > 0 && rel_tol < 1)) {
    throw RejectedInput("FitOptions: rel_tol must be in (0, 1)");
  }
  if (max_outer_iters < 1) {
    throw RejectedInput("FitOptions: max_outer_iters must be >= 1");
  }
  if (patience < 1) throw RejectedInput("FitOptions: patience must be >= 1");
}

EnergyModel init_model(const std::vector<ActivitySample>& samples,
                       const FitOptions& options) {
  FitOptionsCheck(options);
  const AlignedDataset aligned = align_features(samples);
  const auto E = static_cast<Eigen::Index>(aligned.event_names.size());
  const auto R = static_cast<Eigen::Index>(aligned.row_paths.size());
  const auto K = static_cast<Eigen::Index>(aligned.samples.size());
  if (E == 0 || R == 0) throw RejectedInput("init_model: need E >= 1 and R >= 1");

  Eigen::MatrixXd Xt(K, E);
  Eigen::VectorXd totals(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index e = 0; e < E; ++e) {
      Xt(k, e) = aligned.samples[k].events.counts[e];
    }
    totals(k) = aligned.samples[k].report.total();
  }

  EnergyModel m;
  m.event_names = aligned.event_names;
  m.row_paths = aligned.row_paths;
  m.train_op = common_op(samples);
  m.kind = ModelKind::hierarchical;
  m.W = Eigen::MatrixXd::Constant(R, E, 1.0 / static_cast<double>(R));
  m.leak_mw = options.fit_leakage ? totals.minCoeff() : 0.0;
  m.alpha = nnls_solve(Xt, totals.array() - m.leak_mw);
  return m;
}

std::pair<EnergyModel, FitReport> fit_hierarchical(
    const std::vector<ActivitySample>& samples, const FitOptions& options) {
  FitOptionsCheck(options);
  const AlignedDataset aligned = align_features(samples);
  const OperatingPoint op = common_op(samples);
  FitState st = build_state(aligned, options.fit_leakage, op);

  const EnergyModel init = init_model(samples, options);
  const Eigen::Index Ei = st.num_internal_events();
  const auto E = static_cast<Eigen::Index>(st.event_names.size());
  const auto R = static_cast<Eigen::Index>(st.row_paths.size());
  st.W = Eigen::MatrixXd::Constant(R, Ei, 1.0 / static_cast<double>(R));
  st.alpha.setZero(Ei);
  st.alpha.head(E) = init.alpha;
  if (st.has_leak) st.alpha(E) = init.leak_mw;

  FitReport report;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  int rising = 0;

  for (int it = 0; it < options.max_outer_iters; ++it) {
    outer_iteration(st, options);
    const double obj = state_objective(st, options);
    if (!report.objective_trace.empty()) {
      const double prev = report.objective_trace.back();
      if (obj > prev + options.rel_tol * (1.0 + std::abs(prev))) {
        if (++rising >= 3) {
          report.objective_trace.push_back(obj);
          throw FitError("fit_hierarchical: objective diverging",
                         report.objective_trace);
        }
      } else {
        rising = 0;
      }
    }
    report.objective_trace.push_back(obj);
    report.iters_used = it + 1;

    if (obj < best * (1.0 - options.rel_tol) || !std::isfinite(best)) {
      best = std::min(best, obj);
      stalled = 0;
    } else {
      best = std::min(best, obj);
      if (++stalled >= options.patience) {
        report.converged = true;
        break;
      }
    }
    if (report.objective_trace.size() >= 2) {
      const double prev =
          report.objective_trace[report.objective_trace.size() - 2];
      if (std::abs(prev - obj) <= options.rel_tol * (1.0 + std::abs(prev))) {
        report.converged = true;
        break;
      }
    }
  }
  return {finalize_state(st, ModelKind::hierarchical), report};
}

EnergyModel fit_aggregate(const std::vector<ActivitySample>& samples,
                          const FitOptions& options) {
  FitOptionsCheck(options);
  const AlignedDataset aligned = align_features(samples);
  const auto E = static_cast<Eigen::Index>(aligned.event_names.size());
  const auto R = static_cast<Eigen::Index>(aligned.row_paths.size());
  const auto K = static_cast<Eigen::Index>(aligned.samples.size());
  if (E == 0 || R == 0) throw RejectedInput("fit_aggregate: need E, R >= 1");

  const Eigen::Index Ei = E + (options.fit_leakage ? 1 : 0);
  Eigen::MatrixXd Xt = Eigen::MatrixXd::Zero(K, Ei);
  Eigen::VectorXd totals(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index e = 0; e < E; ++e) {
      Xt(k, e) = aligned.samples[k].events.counts[e];
    }
    if (options.fit_leakage) Xt(k, Ei - 1) = 1.0;
    totals(k) = aligned.samples[k].report.total();
  }
  const Eigen::VectorXd coeffs =
      ridge_nonneg_solve(Xt, totals, options.lambda_alpha);

  EnergyModel m;
  m.event_names = aligned.event_names;
  m.row_paths = aligned.row_paths;
  m.train_op = common_op(samples);
  m.kind = ModelKind::aggregate;
  m.W = Eigen::MatrixXd::Constant(R, E, 1.0 / static_cast<double>(R));
  m.alpha = coeffs.head(E);
  m.leak_mw = options.fit_leakage ? coeffs(Ei - 1) : 0.0;
  return m;
}

std::pair<double, double> select_hyperparameters(
    const std::vector<ActivitySample>& samples,
    const std::vector<std::pair<double, double>>& grid,
    const FitOptions& base_options) {
  if (grid.empty()) throw RejectedInput("select_hyperparameters: empty grid");
  if (grid.size() == 1) return grid.front();

  std::set<std::string> kernels;
  for (const auto& s : samples) kernels.insert(s.kernel);
  if (kernels.size() < 2) {
    throw RejectedInput("select_hyperparameters: need >= 2 kernels for "
                        "kernel-wise splits");
  }

  std::pair<double, double> chosen = grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& [lw, la] : grid) {
    FitOptions o = base_options;
    o.lambda_w = lw;
    o.lambda_alpha = la;
    double score_acc = 0.0;
    for (const auto& g : kernels) {
      std::vector<ActivitySample> train, held;
      for (const auto& s : samples) {
        (s.kernel == g ? held : train).push_back(s);
      }
      const EnergyModel m = fit_hierarchical(train, o).first;
      std::vector<double> pred, truth;
      for (const auto& s : held) {
        pred.push_back(predict_total(m, project_events(m, s.events)));
        truth.push_back(s.report.total());
      }
      score_acc += mean_abs_pct_err(pred, truth);
    }
    const double score = score_acc / static_cast<double>(kernels.size());
    const bool first = !std::isfinite(best_score);
    const double tie_eps = first ? 0.0 : 1e-12 * (1.0 + std::abs(best_score));
    const bool better = first || score < best_score - tie_eps;
    const bool tied = !first && std::abs(score - best_score) <= tie_eps;
    if (better ||
        (tied && (lw > chosen.first ||
                  (lw == chosen.first && la > chosen.second)))) {
      if (better) best_score = score;
      chosen = {lw, la};
    }
  }
  return chosen;
}

EnergyModel warm_start_update(const EnergyModel& model,
                              const std::vector<ActivitySample>& samples,
                              int steps, const FitOptions& options) {
  FitOptionsCheck(options);
  model.validate();
  if (steps < 0) throw RejectedInput("warm_start_update: steps must be >= 0");
  const AlignedDataset aligned = align_features(samples);

  const bool grows = aligned.event_names != model.event_names ||
                     aligned.row_paths != model.row_paths;
  if (steps == 0 && !grows) return model;

  // Grow label spaces to the sorted union; new rows start at zero, new event
  // columns uniform.
  std::set<std::string> ev(model.event_names.begin(), model.event_names.end());
  ev.insert(aligned.event_names.begin(), aligned.event_names.end());
  std::set<std::string> rp(model.row_paths.begin(), model.row_paths.end());
  rp.insert(aligned.row_paths.begin(), aligned.row_paths.end());

  std::vector<ActivitySample> realigned;
  {
    // Re-align samples over the union by adding a phantom zero-count/zero-mW
    // entry for labels the samples never mention.
    std::vector<ActivitySample> padded = samples;
    ActivitySample& pivot = padded.front();
    std::map<std::string, double> have_e;
    for (const auto& n : pivot.events.names) have_e[n] = 1;
    for (const auto& n : ev) {
      if (!have_e.count(n)) {
        pivot.events.names.push_back(n);
        pivot.events.counts.push_back(0.0);
      }
    }
    std::set<std::string> have_r;
    for (const auto& r : pivot.report.rows) have_r.insert(r.path);
    for (const auto& p : rp) {
      if (!have_r.count(p)) pivot.report.rows.push_back({p, 0.0});
    }
    realigned = align_features(padded).samples;
  }

  AlignedDataset grown;
  grown.event_names.assign(ev.begin(), ev.end());
  grown.row_paths.assign(rp.begin(), rp.end());
  grown.samples = std::move(realigned);

  const bool keep_leak = options.fit_leakage || model.leak_mw > 0;
  FitState st = build_state(grown, keep_leak, common_op(samples));
  const auto E = static_cast<Eigen::Index>(grown.event_names.size());
  const auto R = static_cast<Eigen::Index>(grown.row_paths.size());
  const Eigen::Index Ei = st.num_internal_events();
  st.W = Eigen::MatrixXd::Zero(R, Ei);
  st.alpha.setZero(Ei);

  std::map<std::string, Eigen::Index> row_ix, ev_ix;
  for (Eigen::Index r = 0; r < R; ++r) row_ix[grown.row_paths[r]] = r;
  for (Eigen::Index e = 0; e < E; ++e) ev_ix[grown.event_names[e]] = e;

  std::set<std::string> old_events(model.event_names.begin(),
                                   model.event_names.end());
  for (std::size_t e = 0; e < model.event_names.size(); ++e) {
    const Eigen::Index ce = ev_ix.at(model.event_names[e]);
    st.alpha(ce) = model.alpha(static_cast<Eigen::Index>(e));
    for (std::size_t r = 0; r < model.row_paths.size(); ++r) {
      st.W(row_ix.at(model.row_paths[r]), ce) =
          model.W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e));
    }
  }
  for (Eigen::Index e = 0; e < E; ++e) {
    if (!old_events.count(grown.event_names[e])) {
      st.W.col(e).setConstant(1.0 / static_cast<double>(R));
    }
  }
  if (st.has_leak) {
    st.W.col(Ei - 1).setConstant(1.0 / static_cast<double>(R));
    st.alpha(Ei - 1) = model.leak_mw;
  }

  // Seed coefficients for genuinely new events from the total-power residual.
  {
    std::vector<Eigen::Index> fresh;
    for (Eigen::Index e = 0; e < E; ++e) {
      if (!old_events.count(grown.event_names[e])) fresh.push_back(e);
    }
    if (!fresh.empty()) {
      const auto K = static_cast<Eigen::Index>(grown.samples.size());
      Eigen::MatrixXd Xn(K, static_cast<Eigen::Index>(fresh.size()));
      Eigen::VectorXd resid(K);
      for (Eigen::Index k = 0; k < K; ++k) {
        double pred = model.leak_mw;
        for (Eigen::Index e = 0; e < E; ++e) {
          if (old_events.count(grown.event_names[e])) {
            pred += st.alpha(e) * st.W.col(e).sum() * st.X(e, k);
          }
        }
        resid(k) = std::max(0.0, grown.samples[k].report.total() - pred);
        for (std::size_t j = 0; j < fresh.size(); ++j) {
          Xn(k, static_cast<Eigen::Index>(j)) = st.X(fresh[j], k);
        }
      }
      const Eigen::VectorXd an = nnls_solve(Xn, resid);
      for (std::size_t j = 0; j < fresh.size(); ++j) {
        st.alpha(fresh[j]) = an(static_cast<Eigen::Index>(j));
      }
    }
  }

  for (int i = 0; i < steps; ++i) outer_iteration(st, options);
  return finalize_state(st, model.kind);
}

EnergyModel rescale_columns(EnergyModel model) {
  for (Eigen::Index e = 0; e < model.W.cols(); ++e) {
    const double s = model.W.col(e).lpNorm<1>();
    if (s > 0) {
      model.W.col(e) /= s;
      model.alpha(e) *= s;
    }
  }
  return model;
}

double fit_objective(const EnergyModel& model,
                     const std::vector<ActivitySample>& samples,
                     double lambda_w, double lambda_alpha) {
  const AlignedDataset aligned = align_features(samples);
  if (aligned.event_names != model.event_names ||
      aligned.row_paths != model.row_paths) {
    throw RejectedInput("fit_objective: samples do not align with the model");
  }
  double acc = 0.0;
  for (const auto& s : aligned.samples) {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
        s.events.counts.data(),
        static_cast<Eigen::Index>(s.events.counts.size()));
    const Eigen::VectorXd yhat = model.W * model.alpha.cwiseProduct(x);
    for (Eigen::Index r = 0; r < yhat.size(); ++r) {
      const double d = s.report.rows[static_cast<std::size_t>(r)].power_mw -
                       yhat(r);
      acc += d * d;
    }
  }
  return acc + lambda_w * model.W.cwiseAbs().sum() +
         lambda_alpha * model.alpha.squaredNorm();
}

}  // namespace capstone
