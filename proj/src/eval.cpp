#include "capstone/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "capstone/predict.hpp"

namespace capstone {

namespace {

// L2 row reconstruction error over the union of model rows and sample rows;
// rows the fold model never saw count fully as error.
double row_l2_error(const EnergyModel& model, const ActivitySample& s) {
  const std::vector<double> yhat =
      predict_rows(model, project_events(model, s.events));
  std::map<std::string, double> pred;
  for (std::size_t r = 0; r < model.row_paths.size(); ++r) {
    pred[model.row_paths[r]] = yhat[r];
  }
  if (model.leak_mw > 0) pred[kLeakRowPath] += model.leak_mw;
  std::map<std::string, double> truth;
  for (const auto& r : s.report.rows) truth[r.path] = r.power_mw;

  std::set<std::string> paths;
  for (const auto& [p, _] : pred) paths.insert(p);
  for (const auto& [p, _] : truth) paths.insert(p);
  double acc = 0.0;
  for (const auto& p : paths) {
    const double a = pred.count(p) ? pred.at(p) : 0.0;
    const double b = truth.count(p) ? truth.at(p) : 0.0;
    acc += (a - b) * (a - b);
  }
  return std::sqrt(acc);
}

// Per-fold W embedded into the global (event, row) label space so folds with
// different unions stay comparable.
Eigen::VectorXd embed_w(const EnergyModel& model,
                        const std::vector<std::string>& events,
                        const std::vector<std::string>& rows) {
  std::map<std::string, Eigen::Index> ei, ri;
  for (std::size_t i = 0; i < events.size(); ++i) {
    ei[events[i]] = static_cast<Eigen::Index>(i);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ri[rows[i]] = static_cast<Eigen::Index>(i);
  }
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(rows.size()),
      static_cast<Eigen::Index>(events.size()));
  for (std::size_t e = 0; e < model.event_names.size(); ++e) {
    for (std::size_t r = 0; r < model.row_paths.size(); ++r) {
      W(ri.at(model.row_paths[r]), ei.at(model.event_names[e])) =
          model.W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e));
    }
  }
  return Eigen::Map<Eigen::VectorXd>(W.data(), W.size());
}

}  // namespace

double mape(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw RejectedInput("mape: lengths must match and be >= 1");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require_finite(pred[i], "mape.pred");
    require_finite(truth[i], "mape.truth");
    if (truth[i] <= 0) throw RejectedInput("mape: truth values must be > 0");
    acc += std::abs(pred[i] - truth[i]) / truth[i];
  }
  return 100.0 * acc / static_cast<double>(pred.size());
}

double r2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw RejectedInput("r2: lengths must match and be >= 1");
  }
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : kUndefinedR2;
  return 1.0 - ss_res / ss_tot;
}

EvalReport loocv(const std::vector<ActivitySample>& samples,
                 const FitOptions& options, ModelKind kind) {
  std::map<std::string, std::vector<ActivitySample>> by_kernel;
  for (const auto& s : samples) {
    s.validate();
    by_kernel[s.kernel].push_back(s);
  }
  if (by_kernel.size() < 2) {
    throw RejectedInput("loocv: need >= 2 distinct kernels");
  }

  const AlignedDataset global = align_features(samples);

  auto fit = [&](const std::vector<ActivitySample>& train) {
    return kind == ModelKind::hierarchical
               ? fit_hierarchical(train, options).first
               : fit_aggregate(train, options);
  };

  EvalReport report;
  std::vector<Eigen::VectorXd> fold_ws;
  for (const auto& [kernel, held] : by_kernel) {
    std::vector<ActivitySample> train;
    for (const auto& s : samples) {
      if (s.kernel != kernel) train.push_back(s);
    }
    const EnergyModel m = fit(train);

    std::vector<double> pred, truth;
    double row_acc = 0.0;
    for (const auto& s : held) {
      pred.push_back(predict_total(m, project_events(m, s.events)));
      truth.push_back(s.report.total());
      row_acc += row_l2_error(m, s);
    }
    KernelEval ke;
    ke.kernel = kernel;
    ke.loocv_total_mape_pct = mape(pred, truth);
    ke.loocv_r2 = r2(pred, truth);
    ke.mean_row_l2_mw = row_acc / static_cast<double>(held.size());
    report.per_kernel.push_back(std::move(ke));

    if (kind == ModelKind::hierarchical) {
      fold_ws.push_back(embed_w(m, global.event_names, global.row_paths));
    }
  }

  // In-sample fit over everything.
  {
    const EnergyModel m = fit(samples);
    std::vector<double> pred, truth;
    for (const auto& s : samples) {
      pred.push_back(predict_total(m, project_events(m, s.events)));
      truth.push_back(s.report.total());
    }
    report.insample_mape_pct = mape(pred, truth);
  }

  if (fold_ws.size() >= 2) {
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < fold_ws.size(); ++i) {
      for (std::size_t j = i + 1; j < fold_ws.size(); ++j) {
        const double na = fold_ws[i].norm(), nb = fold_ws[j].norm();
        acc += (na > 0 && nb > 0) ? fold_ws[i].dot(fold_ws[j]) / (na * nb) : 0.0;
        ++pairs;
      }
    }
    report.w_stability = acc / pairs;
  }
  return report;
}

}  // namespace capstone
