#include "capstone/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "capstone/predict.hpp"

namespace capstone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  for (std::size_t i = n; i < a.size(); ++i) na += a[i] * a[i];
  for (std::size_t i = n; i < b.size(); ++i) nb += b[i] * b[i];
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Features standardized to zero mean / unit variance over the stream before
// cosine, so no single dimension dominates the diversity penalty.
std::vector<std::vector<double>> standardized_features(
    const std::vector<PnrConfiguration>& stream) {
  std::size_t dims = 0;
  for (const auto& x : stream) dims = std::max(dims, x.features.size());
  std::vector<std::vector<double>> out(stream.size(),
                                       std::vector<double>(dims, 0.0));
  if (dims == 0 || stream.empty()) return out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    for (std::size_t d = 0; d < stream[i].features.size(); ++d) {
      out[i][d] = stream[i].features[d];
    }
  }
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0;
    for (const auto& f : out) mean += f[d];
    mean /= static_cast<double>(out.size());
    double var = 0;
    for (const auto& f : out) var += (f[d] - mean) * (f[d] - mean);
    var /= static_cast<double>(out.size());
    const double sd = std::sqrt(var);
    for (auto& f : out) f[d] = sd > 0 ? (f[d] - mean) / sd : 0.0;
  }
  return out;
}

double score_features(double freq, const std::vector<double>& phi,
                      const std::vector<const std::vector<double>*>& set,
                      double lambda) {
  double s = freq;
  for (const auto* other : set) s -= lambda * cosine(phi, *other);
  return s;
}

// Conservative split-conformal order statistic: the ceil((1-a)(n+1))-th
// smallest residual, +inf when that index exceeds n.
double conservative_quantile(std::vector<double> residuals, double alpha) {
  const auto n = static_cast<long>(residuals.size());
  const auto idx =
      static_cast<long>(std::ceil((1.0 - alpha) * static_cast<double>(n + 1)));
  if (idx > n) return kInf;
  std::sort(residuals.begin(), residuals.end());
  return residuals[static_cast<std::size_t>(idx - 1)];
}

// Shared Algorithm-1 state machine; guardband and conformal differ only in
// how the anchor/speculative upper bounds are formed.
PlannerResult run_selection(
    const std::vector<PnrConfiguration>& stream, const PlannerKnobs& knobs,
    const PowerPredictor& predictor, PlanMode mode,
    const std::function<std::pair<double, double>(double, const PnrConfiguration&)>&
        bounds_of) {
  knobs.validate();
  PlannerResult result;
  result.mode = mode;
  if (stream.empty()) {
    result.note = "empty candidate stream";
    return result;
  }

  const auto phi = standardized_features(stream);

  std::optional<std::size_t> anchor;
  double anchor_pred = 0, anchor_bound = 0;
  struct Spec {
    std::size_t idx;
    double pred, bound;
  };
  // Capacity K: the anchor usually coincides with the best speculative
  // candidate, and the final assembly trims the set back to K total.
  std::vector<Spec> specs;

  auto spec_ptrs = [&] {
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& s : specs) ptrs.push_back(&phi[s.idx]);
    return ptrs;
  };

  double f_prev = 0.0;
  std::size_t last_processed = 0;
  bool broke = false;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const auto& x = stream[t];
    x.validate();
    if (x.freq_mhz < f_prev + knobs.min_freq_step_mhz) continue;

    const double mu = predictor(x);
    const auto [u_anc, u_spec] = bounds_of(mu, x);

    if (u_anc <= knobs.cap_mw) {
      anchor = t;
      anchor_pred = mu;
      anchor_bound = u_anc;
    }

    if (u_spec <= knobs.cap_mw) {
      if (static_cast<int>(specs.size()) < knobs.k) {
        specs.push_back({t, mu, u_spec});
      } else {
        const auto ptrs = spec_ptrs();
        std::size_t worst = 0;
        double worst_score = kInf;
        for (std::size_t i = 0; i < specs.size(); ++i) {
          const double s = score_features(stream[specs[i].idx].freq_mhz,
                                          phi[specs[i].idx], ptrs,
                                          knobs.diversity_lambda);
          if (s < worst_score) {
            worst_score = s;
            worst = i;
          }
        }
        const double sx = score_features(x.freq_mhz, phi[t], ptrs,
                                         knobs.diversity_lambda);
        if (sx > worst_score) specs[worst] = {t, mu, u_spec};
      }
    } else {
      last_processed = t;
      broke = true;
      break;
    }
    f_prev = x.freq_mhz;
    last_processed = t;
  }

  result.stopped_at_iteration = stream[last_processed].iteration;
  if (!broke && !anchor && specs.empty()) {
    result.note = "no candidate satisfied the bound";
  }

  std::set<std::string> seen_graphs;
  std::size_t budget = static_cast<std::size_t>(knobs.k);
  if (anchor) {
    result.selected.push_back({stream[*anchor], anchor_pred, anchor_bound,
                               Role::anchor});
    seen_graphs.insert(stream[*anchor].graph_id);
    --budget;
  }
  // Keep the highest-frequency speculative candidates up to the remaining
  // budget, then report them in ascending frequency order.
  std::sort(specs.begin(), specs.end(), [&](const Spec& a, const Spec& b) {
    if (stream[a.idx].freq_mhz != stream[b.idx].freq_mhz) {
      return stream[a.idx].freq_mhz > stream[b.idx].freq_mhz;
    }
    return stream[a.idx].graph_id < stream[b.idx].graph_id;
  });
  std::vector<Spec> kept;
  for (const auto& s : specs) {
    if (kept.size() >= budget) break;
    if (!seen_graphs.insert(stream[s.idx].graph_id).second) continue;
    kept.push_back(s);
  }
  std::sort(kept.begin(), kept.end(), [&](const Spec& a, const Spec& b) {
    if (stream[a.idx].freq_mhz != stream[b.idx].freq_mhz) {
      return stream[a.idx].freq_mhz < stream[b.idx].freq_mhz;
    }
    return stream[a.idx].graph_id < stream[b.idx].graph_id;
  });
  for (const auto& s : kept) {
    result.selected.push_back({stream[s.idx], s.pred, s.bound,
                               Role::speculative});
  }
  return result;
}

}  // namespace

void PlannerKnobs::validate() const {
  require_finite(cap_mw, "PlannerKnobs.cap_mw");
  if (cap_mw <= 0) throw RejectedInput("PlannerKnobs: cap_mw must be > 0");
  if (k < 1) throw RejectedInput("PlannerKnobs: k must be >= 1");
  if (gamma_anchor < 0 || gamma_spec < 0) {
    throw RejectedInput("PlannerKnobs: guardbands must be >= 0");
  }
  if (gamma_spec > gamma_anchor) {
    throw RejectedInput("PlannerKnobs: gamma_spec must be <= gamma_anchor");
  }
  if (diversity_lambda < 0) {
    throw RejectedInput("PlannerKnobs: diversity_lambda must be >= 0");
  }
  if (min_freq_step_mhz < 0) {
    throw RejectedInput("PlannerKnobs: min_freq_step_mhz must be >= 0");
  }
}

void ErrorBounds::validate() const {
  for (const auto& [lo, hi] : factors) {
    require_finite(lo, "ErrorBounds.lo");
    require_finite(hi, "ErrorBounds.hi");
    if (!(lo > 0 && lo <= hi)) {
      throw RejectedInput("ErrorBounds: need 0 < lo <= hi");
    }
  }
  if (steps_per_event < 1) {
    throw RejectedInput("ErrorBounds: steps_per_event must be >= 1");
  }
  if (budget < 1) throw RejectedInput("ErrorBounds: budget must be >= 1");
}

const char* to_string(Role role) {
  return role == Role::anchor ? "anchor" : "speculative";
}

const char* to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::guardband: return "guardband";
    case PlanMode::conformal: return "conformal";
    case PlanMode::bounded_error: return "bounded_error";
    case PlanMode::baseline: return "baseline";
  }
  return "unknown";
}

bool PlannerResult::has_anchor() const {
  return std::any_of(selected.begin(), selected.end(),
                     [](const SelectedCandidate& c) {
                       return c.role == Role::anchor;
                     });
}

double score_candidate(const PnrConfiguration& x,
                       const std::vector<const PnrConfiguration*>& current_set,
                       double lambda) {
  double s = x.freq_mhz;
  for (const auto* y : current_set) {
    s -= lambda * cosine(x.features, y->features);
  }
  return s;
}

PlannerResult plan_guardband(const std::vector<PnrConfiguration>& stream,
                             const PlannerKnobs& knobs,
                             const PowerPredictor& predictor) {
  return run_selection(
      stream, knobs, predictor, PlanMode::guardband,
      [&](double mu, const PnrConfiguration&) {
        return std::pair{(1.0 + knobs.gamma_anchor) * mu,
                         (1.0 + knobs.gamma_spec) * mu};
      });
}

QuantileTable calibrate_conformal(const std::vector<CalibrationSample>& cal,
                                  double alpha_anchor, double alpha_spec,
                                  bool scale_with_freq, double f_ref_mhz,
                                  int n_min) {
  if (cal.empty()) throw RejectedInput("calibrate_conformal: empty calibration");
  if (!(alpha_anchor > 0 && alpha_anchor < 1) ||
      !(alpha_spec > 0 && alpha_spec < 1)) {
    throw RejectedInput("calibrate_conformal: alpha must be in (0, 1)");
  }
  if (f_ref_mhz <= 0) throw RejectedInput("calibrate_conformal: f_ref must be > 0");

  QuantileTable table;
  table.alpha_anchor = alpha_anchor;
  table.alpha_spec = alpha_spec;
  table.scale_with_freq = scale_with_freq;
  table.f_ref_mhz = f_ref_mhz;
  table.n_min = n_min;

  std::map<std::string, std::vector<double>> by_group;
  std::vector<double> all;
  for (const auto& c : cal) {
    require_finite(c.ptpx_mw, "CalibrationSample.ptpx_mw");
    require_finite(c.pred_mw, "CalibrationSample.pred_mw");
    if (c.ptpx_mw < 0 || c.pred_mw < 0) {
      throw RejectedInput("calibrate_conformal: negative power");
    }
    // One-sided underestimation residual; overestimation cannot violate a cap.
    double r = std::max(0.0, c.ptpx_mw - c.pred_mw);
    if (scale_with_freq) r /= std::max(1.0, c.freq_mhz / f_ref_mhz);
    by_group[c.group].push_back(r);
    all.push_back(r);
  }
  for (const auto& [g, rs] : by_group) {
    table.group_n[g] = static_cast<int>(rs.size());
    table.group_q_anchor[g] = conservative_quantile(rs, alpha_anchor);
    table.group_q_spec[g] = conservative_quantile(rs, alpha_spec);
  }
  table.global_q_anchor = conservative_quantile(all, alpha_anchor);
  table.global_q_spec = conservative_quantile(all, alpha_spec);
  return table;
}

double conformal_upper_bound(const QuantileTable& table, double pred_mw,
                             double freq_mhz, const std::string& group,
                             Role mode) {
  const bool anchor = mode == Role::anchor;
  double q = anchor ? table.global_q_anchor : table.global_q_spec;
  auto n_it = table.group_n.find(group);
  if (n_it != table.group_n.end() && n_it->second >= table.n_min) {
    q = anchor ? table.group_q_anchor.at(group) : table.group_q_spec.at(group);
  }
  const double rho =
      table.scale_with_freq ? std::max(1.0, freq_mhz / table.f_ref_mhz) : 1.0;
  return pred_mw + rho * q;
}

PlannerResult plan_conformal(const std::vector<PnrConfiguration>& stream,
                             const PlannerKnobs& knobs,
                             const QuantileTable& table,
                             const PowerPredictor& predictor,
                             const std::string& group) {
  PlannerResult result = run_selection(
      stream, knobs, predictor, PlanMode::conformal,
      [&](double mu, const PnrConfiguration& x) {
        return std::pair{
            conformal_upper_bound(table, mu, x.freq_mhz, group, Role::anchor),
            conformal_upper_bound(table, mu, x.freq_mhz, group,
                                  Role::speculative)};
      });
  if (result.selected.empty() && !stream.empty()) {
    const double qa =
        conformal_upper_bound(table, 0.0, table.f_ref_mhz, group, Role::anchor);
    const double qs = conformal_upper_bound(table, 0.0, table.f_ref_mhz, group,
                                            Role::speculative);
    if (std::isinf(qa) || std::isinf(qs)) {
      result.note = "conformal quantile is infinite (insufficient calibration "
                    "data for the requested miscoverage level)";
    }
  }
  return result;
}

double map_set_confidence(double epsilon, int k, SetBound mode) {
  if (!(epsilon > 0 && epsilon < 1)) {
    throw RejectedInput("map_set_confidence: epsilon must be in (0, 1)");
  }
  if (k < 1) throw RejectedInput("map_set_confidence: k must be >= 1");
  if (mode == SetBound::union_bound) return epsilon / k;
  return 1.0 - std::pow(1.0 - epsilon, 1.0 / static_cast<double>(k));
}

std::vector<EnergyModel> enumerate_error_models(const EnergyModel& base,
                                                const ErrorBounds& bounds) {
  base.validate();
  bounds.validate();
  const std::size_t E = base.num_events();
  if (!bounds.factors.empty() && bounds.factors.size() != E) {
    throw RejectedInput("enumerate_error_models: bounds do not match events");
  }

  std::vector<std::vector<double>> grids(E);
  long count = 1;
  for (std::size_t e = 0; e < E; ++e) {
    const auto [lo, hi] =
        bounds.factors.empty() ? std::pair{1.0, 1.0} : bounds.factors[e];
    if (lo == hi) {
      grids[e] = {lo};
    } else if (bounds.steps_per_event == 1) {
      grids[e] = {0.5 * (lo + hi)};
    } else {
      for (int s = 0; s < bounds.steps_per_event; ++s) {
        grids[e].push_back(lo + (hi - lo) * static_cast<double>(s) /
                                    static_cast<double>(bounds.steps_per_event - 1));
      }
    }
    if (count > bounds.budget / static_cast<long>(grids[e].size()) &&
        grids[e].size() > 1) {
      count = bounds.budget + 1;  // overflow guard
      break;
    }
    count *= static_cast<long>(grids[e].size());
  }
  if (count > bounds.budget) {
    throw RejectedInput("enumerate_error_models: model count exceeds budget of " +
                        std::to_string(bounds.budget) +
                        "; raise the budget or coarsen the grid");
  }

  std::vector<EnergyModel> models;
  models.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> ix(E, 0);
  while (true) {
    EnergyModel m = base;
    for (std::size_t e = 0; e < E; ++e) {
      m.alpha(static_cast<Eigen::Index>(e)) *= grids[e][ix[e]];
    }
    models.push_back(std::move(m));
    std::size_t d = 0;
    for (; d < E; ++d) {
      if (++ix[d] < grids[d].size()) break;
      ix[d] = 0;
    }
    if (d == E) break;
  }
  return models;
}

PlannerResult plan_bounded_error(const std::vector<PnrConfiguration>& candidates,
                                 const EnergyModel& base,
                                 const ErrorBounds& bounds, double cap_mw) {
  if (cap_mw <= 0) throw RejectedInput("plan_bounded_error: cap must be > 0");
  const std::vector<EnergyModel> models = enumerate_error_models(base, bounds);

  PlannerResult result;
  result.mode = PlanMode::bounded_error;
  if (candidates.empty()) {
    result.note = "empty candidate list";
    return result;
  }
  for (const auto& x : candidates) x.validate();
  result.stopped_at_iteration = candidates.back().iteration;

  // Per candidate: base prediction plus the worst-case prediction over the
  // model family (reported as the bound).
  std::vector<double> base_pred(candidates.size());
  std::vector<double> worst_pred(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    base_pred[i] = predict_power_at(base, project_events(base, candidates[i].events),
                                    candidates[i].freq_mhz);
  }

  int infeasible_models = 0;
  std::map<std::pair<std::string, double>, std::size_t> chosen;  // dedup key
  for (const auto& m : models) {
    long best = -1;
    double best_pred = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double p = predict_power_at(
          m, project_events(m, candidates[i].events), candidates[i].freq_mhz);
      worst_pred[i] = std::max(worst_pred[i], p);
      if (p > cap_mw) continue;
      const bool tie = std::abs(p - best_pred) <= 1e-12 * (1.0 + best_pred);
      bool wins = p > best_pred && !tie;
      if (tie && best >= 0) {
        const auto& cur = candidates[static_cast<std::size_t>(best)];
        const auto& alt = candidates[i];
        wins = alt.freq_mhz > cur.freq_mhz ||
               (alt.freq_mhz == cur.freq_mhz && alt.iteration < cur.iteration);
      }
      if (wins) {
        best = static_cast<long>(i);
        best_pred = p;
      }
    }
    if (best < 0) {
      ++infeasible_models;
      continue;
    }
    const auto& x = candidates[static_cast<std::size_t>(best)];
    chosen.emplace(std::pair{x.graph_id, x.freq_mhz},
                   static_cast<std::size_t>(best));
  }

  std::vector<std::size_t> picks;
  for (const auto& [key, i] : chosen) picks.push_back(i);
  std::sort(picks.begin(), picks.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].freq_mhz != candidates[b].freq_mhz) {
      return candidates[a].freq_mhz < candidates[b].freq_mhz;
    }
    return candidates[a].graph_id < candidates[b].graph_id;
  });
  for (std::size_t i : picks) {
    result.selected.push_back({candidates[i], base_pred[i], worst_pred[i],
                               Role::speculative});
  }
  if (infeasible_models > 0) {
    result.note = std::to_string(infeasible_models) + " of " +
                  std::to_string(models.size()) +
                  " error models had no feasible candidate";
  }
  return result;
}

PlannerResult plan_baseline(const std::vector<PnrConfiguration>& stream) {
  PlannerResult result;
  result.mode = PlanMode::baseline;
  if (stream.empty()) {
    result.note = "empty candidate stream";
    return result;
  }
  const auto& x = stream.back();
  x.validate();
  result.stopped_at_iteration = x.iteration;
  result.selected.push_back({x, 0.0, 0.0, Role::speculative});
  return result;
}

}  // namespace capstone
