#include "capstone/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "capstone/predict.hpp"

namespace capstone {

namespace {

constexpr const char* kRegisterEvent = "registers";

double uniform01(std::uint64_t h) {
  // splitmix-style scramble, then 53-bit mantissa
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  h ^= h >> 31;
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double hashed_uniform(long seed, const std::string& tag) {
  std::ostringstream os;
  os << seed << '|' << tag;
  return uniform01(fnv1a64(os.str()));
}

std::string canonical_graph_serialization(const std::string& kernel, int t,
                                          double f, int ii,
                                          const EventVector& ev) {
  std::ostringstream os;
  os.precision(17);
  os << kernel << '|' << t << '|' << f << '|' << ii;
  for (std::size_t i = 0; i < ev.names.size(); ++i) {
    os << '|' << ev.names[i] << '=' << ev.counts[i];
  }
  return os.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile95(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

}  // namespace

void HarnessParams::validate() const {
  if (iterations < 1) throw RejectedInput("HarnessParams: iterations must be >= 1");
  if (!(f0_mhz > 0) || !(f_max_mhz > f0_mhz)) {
    throw RejectedInput("HarnessParams: need 0 < f0 < f_max");
  }
  if (!(tau > 0)) throw RejectedInput("HarnessParams: tau must be > 0");
  if (registers_per_iter < 0 || interconnect_growth_rate < 0) {
    throw RejectedInput("HarnessParams: growth rates must be >= 0");
  }
  if (noise_rel < 0) throw RejectedInput("HarnessParams: noise_rel must be >= 0");
  base_events.validate();
}

std::vector<PnrConfiguration> generate_pipeline_sequence(
    const HarnessParams& params) {
  params.validate();
  std::vector<PnrConfiguration> out;
  out.reserve(static_cast<std::size_t>(params.iterations));
  for (int t = 0; t < params.iterations; ++t) {
    PnrConfiguration x;
    x.iteration = t;
    x.freq_mhz = params.f0_mhz +
                 (params.f_max_mhz - params.f0_mhz) *
                     (1.0 - std::exp(-static_cast<double>(t) / params.tau));
    x.ii = 1;
    x.events = params.base_events;
    bool has_registers = false;
    double ic_count = 0.0, pe_count = 0.0;
    for (std::size_t i = 0; i < x.events.names.size(); ++i) {
      const auto& name = x.events.names[i];
      if (name == kRegisterEvent) {
        has_registers = true;
        x.events.counts[i] += params.registers_per_iter * t;
      } else if (name.rfind("ic_", 0) == 0) {
        x.events.counts[i] *= 1.0 + params.interconnect_growth_rate * t;
      }
      if (name.rfind("ic_", 0) == 0) ic_count += x.events.counts[i];
      if (name == "pe_tiles") pe_count = x.events.counts[i];
    }
    if (!has_registers && params.registers_per_iter > 0) {
      x.events.names.push_back(kRegisterEvent);
      x.events.counts.push_back(params.registers_per_iter * t);
    }
    // Diversity features: interconnect stream count, PE ports used, frequency
    // rounded to 10 MHz.
    x.features = {ic_count, 4.0 * pe_count, std::round(x.freq_mhz / 10.0) * 10.0};
    x.graph_id = fnv1a64_hex(canonical_graph_serialization(
        params.kernel, t, x.freq_mhz, x.ii, x.events));
    out.push_back(std::move(x));
  }
  return out;
}

double oracle_power(const EnergyModel& truth_model,
                    const PnrConfiguration& config, double noise_rel,
                    long seed) {
  const double base = predict_power_at(
      truth_model, project_events(truth_model, config.events), config.freq_mhz);
  if (noise_rel == 0.0) return base;
  std::ostringstream tag;
  tag.precision(17);
  tag << config.graph_id << '|' << config.freq_mhz;
  const double u = hashed_uniform(seed, tag.str());
  const double eta = (2.0 * u - 1.0) * 3.0 * noise_rel;
  return base * (1.0 + eta);
}

double delta_cap(double cap_mw, double power_mw) {
  if (cap_mw <= 0) throw RejectedInput("delta_cap: cap must be > 0");
  return (cap_mw - power_mw) / cap_mw * 100.0;
}

std::pair<double, double> throttle(double freq_mhz, double power_mw,
                                   double factor) {
  if (factor <= 0) throw RejectedInput("throttle: factor must be > 0");
  return {freq_mhz / factor, power_mw / factor};
}

CellResult evaluate_planner(const PlannerResult& result,
                            const PowerPredictor& truth_oracle, double cap_mw,
                            double baseline_freq_mhz) {
  CellResult cell;
  cell.cap_mw = cap_mw;
  cell.planner = result.mode;
  cell.k_returned = static_cast<int>(result.selected.size());

  double best_feasible_freq = -1.0, best_feasible_power = 0.0;
  double max_freq = 0.0;
  for (const auto& c : result.selected) {
    const double p = truth_oracle(c.config);
    max_freq = std::max(max_freq, c.config.freq_mhz);
    if (p <= cap_mw && c.config.freq_mhz > best_feasible_freq) {
      best_feasible_freq = c.config.freq_mhz;
      best_feasible_power = p;
    }
  }
  cell.success = best_feasible_freq >= 0;
  if (cell.success) {
    cell.dcap_pct = delta_cap(cap_mw, best_feasible_power);
    cell.chosen_freq_mhz = best_feasible_freq;
    cell.norm_freq =
        baseline_freq_mhz > 0 ? best_feasible_freq / baseline_freq_mhz : 0.0;
  } else {
    cell.dcap_pct = std::numeric_limits<double>::quiet_NaN();
    cell.chosen_freq_mhz = max_freq;
    cell.norm_freq = baseline_freq_mhz > 0 ? max_freq / baseline_freq_mhz : 0.0;
  }
  return cell;
}

EnergyModel default_truth_model() {
  EnergyModel m;
  m.event_names = {"ic_port", "ic_rmux", "ic_sb", "io_tiles",
                   "mem_tiles", "pe_tiles", "registers"};
  m.row_paths = {"clk/clk_tree",   "ic/PORT_route", "ic/REG",
                 "ic/RMUX_route",  "ic/SB_route",   "misc/ctrl",
                 "tiles/IO_tile",  "tiles/MEM_tile", "tiles/PE_tile"};
  const Eigen::Index R = 9, E = 7;
  m.W = Eigen::MatrixXd::Zero(R, E);
  // Each event concentrates on its natural row with a small clock/control
  // spread, mirroring the block structure of hierarchical signoff reports.
  auto col = [&](int e, int main_row) {
    m.W(main_row, e) = 0.85;
    m.W(0, e) = 0.10;  // clk_tree
    m.W(5, e) = 0.05;  // misc/ctrl
  };
  col(0, 1);  // ic_port -> PORT_route
  col(1, 3);  // ic_rmux -> RMUX_route
  col(2, 4);  // ic_sb   -> SB_route
  col(3, 6);  // io_tiles -> IO_tile
  col(4, 7);  // mem_tiles -> MEM_tile
  col(5, 8);  // pe_tiles -> PE_tile
  col(6, 2);  // registers -> REG
  m.alpha.resize(E);
  m.alpha << 0.08, 0.10, 0.15, 0.40, 0.80, 0.50, 0.05;
  m.leak_mw = 10.0;
  m.train_op = {0.8, 100.0, "tt"};
  m.kind = ModelKind::hierarchical;
  return m;
}

std::vector<std::string> default_suite_kernels() {
  return {"conv3x3",  "fft",     "gemm",        "inner_prod",
          "sddmm",    "spmv",    "tensor3_ttv", "vec_elemadd"};
}

EventVector default_base_events(const std::string& kernel, long seed) {
  auto jitter = [&](const char* ev, double lo, double hi) {
    return lo + (hi - lo) * hashed_uniform(seed, kernel + std::string("|") + ev);
  };
  EventVector ev;
  ev.names = {"ic_port", "ic_rmux", "ic_sb", "io_tiles",
              "mem_tiles", "pe_tiles", "registers"};
  ev.counts = {std::round(jitter("ic_port", 40, 120)),
               std::round(jitter("ic_rmux", 60, 150)),
               std::round(jitter("ic_sb", 80, 200)),
               std::round(jitter("io_tiles", 2, 8)),
               std::round(jitter("mem_tiles", 4, 12)),
               std::round(jitter("pe_tiles", 20, 60)),
               std::round(jitter("registers", 40, 80))};
  return ev;
}

SuiteResult run_suite(const SuiteConfig& config) {
  const EnergyModel truth = default_truth_model();

  // The planner's model: truth with seeded per-event multiplicative error,
  // standing in for a learned model's bias.
  EnergyModel learned = truth;
  for (Eigen::Index e = 0; e < learned.alpha.size(); ++e) {
    const double u = hashed_uniform(config.seed,
                                    "model_err|" + learned.event_names[e]);
    learned.alpha(e) *= 1.0 + config.model_error_rel * (2.0 * u - 1.0);
  }

  const std::vector<std::string> kernels = default_suite_kernels();
  const long cal_seed = config.seed * 1000003 + 1;
  const long eval_seed = config.seed * 1000003 + 2;

  // Offline conformal calibration across all kernels.
  std::vector<CalibrationSample> cal;
  std::map<std::string, std::vector<PnrConfiguration>> streams;
  for (const auto& kernel : kernels) {
    HarnessParams hp;
    hp.seed = config.seed;
    hp.iterations = config.iterations;
    hp.kernel = kernel;
    hp.base_events = default_base_events(kernel, config.seed);
    hp.truth_model = truth;
    hp.noise_rel = config.noise_rel;
    streams[kernel] = generate_pipeline_sequence(hp);
    for (const auto& x : streams[kernel]) {
      const double pred = predict_power_at(
          learned, project_events(learned, x.events), x.freq_mhz);
      for (int d = 0; d < config.calibration_draws; ++d) {
        cal.push_back({oracle_power(truth, x, config.noise_rel,
                                    cal_seed + 17 * d),
                       pred, kernel, x.freq_mhz});
      }
    }
  }
  const QuantileTable table = calibrate_conformal(
      cal, config.alpha_anchor, config.alpha_spec, /*scale_with_freq=*/true);

  ErrorBounds bounds;
  bounds.factors.assign(truth.event_names.size(),
                        {config.err_lo, config.err_hi});
  bounds.steps_per_event = config.err_steps;

  const PlanMode modes[] = {PlanMode::guardband, PlanMode::conformal,
                            PlanMode::bounded_error, PlanMode::baseline};

  SuiteResult out;
  for (const auto& kernel : kernels) {
    const auto& stream = streams.at(kernel);
    const double baseline_freq = stream.back().freq_mhz;
    auto oracle = [&](const PnrConfiguration& x) {
      return oracle_power(truth, x, config.noise_rel, eval_seed);
    };
    auto predictor = [&](const PnrConfiguration& x) {
      return predict_power_at(learned, project_events(learned, x.events),
                              x.freq_mhz);
    };

    double p_min = std::numeric_limits<double>::infinity(), p_max = 0;
    for (const auto& x : stream) {
      const double p = oracle_power(truth, x, 0.0, 0);
      p_min = std::min(p_min, p);
      p_max = std::max(p_max, p);
    }

    for (double frac : config.cap_fractions) {
      const double cap = p_min + frac * (p_max - p_min);
      PlannerKnobs knobs = config.knobs;
      knobs.cap_mw = cap;
      for (PlanMode mode : modes) {
        PlannerResult plan;
        switch (mode) {
          case PlanMode::guardband:
            plan = plan_guardband(stream, knobs, predictor);
            break;
          case PlanMode::conformal:
            plan = plan_conformal(stream, knobs, table, predictor, kernel);
            break;
          case PlanMode::bounded_error:
            plan = plan_bounded_error(stream, learned, bounds, cap);
            break;
          case PlanMode::baseline:
            plan = plan_baseline(stream);
            break;
        }
        CellResult cell = evaluate_planner(plan, oracle, cap, baseline_freq);
        cell.kernel = kernel;
        out.cells.push_back(cell);
      }
    }
  }

  for (PlanMode mode : modes) {
    EvalSummary s;
    s.planner = mode;
    int n = 0, successes = 0;
    double norm_acc = 0, k_acc = 0;
    std::vector<double> dcaps;
    for (const auto& c : out.cells) {
      if (c.planner != mode) continue;
      ++n;
      successes += c.success ? 1 : 0;
      norm_acc += c.norm_freq;
      k_acc += c.k_returned;
      if (c.success) dcaps.push_back(c.dcap_pct);
    }
    s.success_rate_pct = n ? 100.0 * successes / n : 0.0;
    s.avg_norm_freq = n ? norm_acc / n : 0.0;
    s.k_returned = n ? k_acc / n : 0.0;
    s.median_dcap_pct = median(dcaps);
    s.p95_dcap_pct = percentile95(dcaps);
    out.summary.push_back(s);
  }
  return out;
}

}  // namespace capstone
