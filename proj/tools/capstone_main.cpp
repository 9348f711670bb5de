// Command-line front end: train/eval/predict/plan/suite over the neutral
// CSV/JSON schemas. All outputs are deterministic for a fixed seed and are
// stamped with the tool version, seed, and config hash.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "capstone/io.hpp"
#include "capstone/predict.hpp"

namespace fs = std::filesystem;
using namespace capstone;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitComputation = 3;

std::string hash_invocation(int argc, char** argv, const std::string& config) {
  std::ostringstream os;
  for (int i = 1; i < argc; ++i) os << argv[i] << '\x1f';
  if (!config.empty() && fs::exists(config)) {
    std::ifstream in(config, std::ios::binary);
    os << in.rdbuf();
  }
  return fnv1a64_hex(os.str());
}

struct FitFlags {
  FitOptions options;
  std::string kind = "hierarchical";

  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda-w", options.lambda_w, "l1 weight on W");
    cmd->add_option("--lambda-alpha", options.lambda_alpha, "l2 weight on alpha");
    cmd->add_option("--max-iters", options.max_outer_iters, "max outer iterations");
    cmd->add_option("--rel-tol", options.rel_tol, "relative objective tolerance");
    cmd->add_option("--patience", options.patience, "early stopping patience");
    cmd->add_flag("--fit-leakage", options.fit_leakage, "fit a static leakage term");
    cmd->add_option("--kind", kind, "model kind")
        ->check(CLI::IsMember({"hierarchical", "aggregate"}));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compile-time power modeling and cap-aware bitstream planning"};
  app.require_subcommand(1);

  long seed = 0;
  std::string out_dir = ".";
  std::string config_path;
  app.add_option("--seed", seed, "global random seed")->envname("CAPSTONE_SEED");
  app.add_option("--out-dir", out_dir, "output directory")
      ->envname("CAPSTONE_OUT_DIR");
  app.set_config("--config", "", "declarative config file (INI/TOML)")
      ->envname("CAPSTONE_CONFIG");
  app.allow_config_extras(false);  // unknown keys are rejected

  // train
  auto* train = app.add_subcommand("train", "fit an energy model from a dataset");
  std::string train_data;
  FitFlags train_flags;
  train->add_option("--data", train_data, "dataset directory")->required();
  train_flags.attach(train);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "leave-one-kernel-out evaluation");
  std::string eval_data;
  FitFlags eval_flags;
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_flags.attach(eval_cmd);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict power for an event file");
  std::string predict_model, predict_events;
  double predict_freq = 0.0;
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--events", predict_events, "events JSON file")->required();
  predict_cmd->add_option("--freq", predict_freq,
                          "query frequency in MHz (default: training point)");

  // plan
  auto* plan = app.add_subcommand("plan", "cap-aware bitstream selection");
  std::string plan_model, plan_candidates, plan_mode = "guardband";
  std::string plan_calibration, plan_group, plan_bounds_file;
  bool plan_simulate = false;
  PlannerKnobs knobs;
  double alpha_anchor = 0.005, alpha_spec = 0.05, f_ref = 100.0;
  bool scale_with_freq = false;
  int n_min = 20;
  double err_lo = 1.0, err_hi = 1.0;
  int err_steps = 3;
  long err_budget = 100000;
  int sim_iters = 40;
  double sim_f0 = 100, sim_fmax = 500, sim_tau = 10;
  std::string sim_kernel = "vec_elemadd";
  plan->add_option("--model", plan_model, "model file")->required();
  plan->add_option("--candidates", plan_candidates, "candidates CSV");
  plan->add_flag("--simulate", plan_simulate,
                 "generate candidates with the synthetic pipelining loop");
  plan->add_option("--mode", plan_mode, "planner mode")
      ->check(CLI::IsMember({"guardband", "conformal", "bounded", "baseline"}));
  plan->add_option("--cap", knobs.cap_mw, "power cap in mW");
  plan->add_option("--k", knobs.k, "max returned bitstreams");
  plan->add_option("--gamma-anchor", knobs.gamma_anchor, "anchor guardband");
  plan->add_option("--gamma-spec", knobs.gamma_spec, "speculative guardband");
  plan->add_option("--diversity-lambda", knobs.diversity_lambda, "diversity weight");
  plan->add_option("--min-freq-step", knobs.min_freq_step_mhz, "min frequency step");
  plan->add_option("--calibration", plan_calibration, "calibration CSV (conformal)");
  plan->add_option("--alpha-anchor", alpha_anchor, "anchor miscoverage");
  plan->add_option("--alpha-spec", alpha_spec, "speculative miscoverage");
  plan->add_flag("--scale-with-freq", scale_with_freq, "frequency-scale residuals");
  plan->add_option("--f-ref", f_ref, "reference frequency for scaling");
  plan->add_option("--n-min", n_min, "min group size before global fallback");
  plan->add_option("--group", plan_group, "calibration group for the stream");
  plan->add_option("--err-lo", err_lo, "uniform lower error factor (bounded)");
  plan->add_option("--err-hi", err_hi, "uniform upper error factor (bounded)");
  plan->add_option("--err-steps", err_steps, "grid steps per event (bounded)");
  plan->add_option("--err-budget", err_budget, "max enumerated models (bounded)");
  plan->add_option("--bounds-file", plan_bounds_file,
                   "JSON {event: [lo, hi]} per-event bounds (bounded)");
  plan->add_option("--iterations", sim_iters, "simulated loop iterations");
  plan->add_option("--f0", sim_f0, "simulated start frequency");
  plan->add_option("--f-max", sim_fmax, "simulated max frequency");
  plan->add_option("--tau", sim_tau, "simulated saturation constant");
  plan->add_option("--kernel", sim_kernel, "simulated kernel name");

  // suite
  auto* suite = app.add_subcommand("suite", "full kernels x caps x planners sweep");
  SuiteConfig suite_cfg;
  suite->add_option("--iterations", suite_cfg.iterations, "loop iterations per kernel");
  suite->add_option("--noise", suite_cfg.noise_rel, "oracle relative noise");
  suite->add_option("--model-error", suite_cfg.model_error_rel,
                    "planner model perturbation");
  suite->add_option("--k", suite_cfg.knobs.k, "bitstreams per planner");
  suite->add_option("--gamma-anchor", suite_cfg.knobs.gamma_anchor, "anchor guardband");
  suite->add_option("--gamma-spec", suite_cfg.knobs.gamma_spec, "spec guardband");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const CLI::Option* config_opt = app.get_config_ptr();
  const std::string config_hash = hash_invocation(
      argc, argv,
      config_opt->count() > 0 ? config_opt->as<std::string>() : std::string{});
  const fs::path out(out_dir);

  try {
    fs::create_directories(out);

    if (*train) {
      const auto samples = io::load_dataset_dir(train_data);
      FitOptions o = train_flags.options;
      o.seed = seed;
      FitReport report;
      EnergyModel model;
      if (train_flags.kind == "hierarchical") {
        std::tie(model, report) = fit_hierarchical(samples, o);
      } else {
        model = fit_aggregate(samples, o);
        report.converged = true;
        report.iters_used = 1;
      }
      io::save_model(out / "model.json", model, seed, config_hash);
      io::write_fit_report(out / "fit_report.json", report, seed, config_hash);
      std::cout << "wrote " << (out / "model.json").string() << "\n";
    } else if (*eval_cmd) {
      const auto samples = io::load_dataset_dir(eval_data);
      FitOptions o = eval_flags.options;
      o.seed = seed;
      const EvalReport report =
          loocv(samples, o, model_kind_from_string(eval_flags.kind));
      io::write_eval_report(out / "eval.csv", out / "eval.json", report, seed,
                            config_hash);
      std::cout << "wrote " << (out / "eval.csv").string() << "\n";
    } else if (*predict_cmd) {
      const EnergyModel model = io::load_model(predict_model);
      const EventVector raw = io::load_events_file(predict_events);
      for (const auto& n : raw.names) {
        if (std::find(model.event_names.begin(), model.event_names.end(), n) ==
            model.event_names.end()) {
          throw RejectedInput("event '" + n + "' is unknown to the model");
        }
      }
      const EventVector ev = project_events(model, raw);
      const Prediction p = predict(model, ev);
      const double freq =
          predict_freq > 0 ? predict_freq : model.train_op.freq_mhz;
      nlohmann::json j = {{"header", io::json_header(seed, config_hash)},
                          {"total_mw", p.total_mw},
                          {"freq_mhz", freq},
                          {"power_at_freq_mw", predict_power_at(model, ev, freq)},
                          {"beta", p.beta},
                          {"rows_mw", p.rows_mw}};
      std::ofstream(out / "prediction.json") << j.dump(2) << "\n";
      std::cout << "wrote " << (out / "prediction.json").string() << "\n";
    } else if (*plan) {
      const EnergyModel model = io::load_model(plan_model);
      std::vector<PnrConfiguration> candidates;
      if (plan_simulate == plan_candidates.empty()) {
        // exactly one source must be given
        if (plan_simulate) {
          HarnessParams hp;
          hp.seed = seed;
          hp.iterations = sim_iters;
          hp.f0_mhz = sim_f0;
          hp.f_max_mhz = sim_fmax;
          hp.tau = sim_tau;
          hp.kernel = sim_kernel;
          hp.base_events = default_base_events(sim_kernel, seed);
          hp.truth_model = model;
          candidates = generate_pipeline_sequence(hp);
          io::write_candidates_csv(out / "candidates.csv", candidates, seed,
                                   config_hash);
        } else {
          candidates = io::load_candidates_csv(plan_candidates);
        }
      } else {
        throw RejectedInput("pass exactly one of --candidates or --simulate");
      }

      auto predictor = [&](const PnrConfiguration& x) {
        return predict_power_at(model, project_events(model, x.events),
                                x.freq_mhz);
      };

      PlannerResult result;
      if (plan_mode == "baseline") {
        result = plan_baseline(candidates);
      } else if (plan_mode == "guardband") {
        result = plan_guardband(candidates, knobs, predictor);
      } else if (plan_mode == "conformal") {
        if (plan_calibration.empty()) {
          throw RejectedInput("--mode conformal requires --calibration");
        }
        const auto cal = io::load_calibration_csv(plan_calibration);
        const QuantileTable table = calibrate_conformal(
            cal, alpha_anchor, alpha_spec, scale_with_freq, f_ref, n_min);
        result = plan_conformal(candidates, knobs, table, predictor, plan_group);
      } else {  // bounded
        ErrorBounds bounds;
        bounds.steps_per_event = err_steps;
        bounds.budget = err_budget;
        if (!plan_bounds_file.empty()) {
          std::ifstream in(plan_bounds_file);
          if (!in) throw RejectedInput("cannot open " + plan_bounds_file);
          const auto j = nlohmann::json::parse(in);
          for (const auto& name : model.event_names) {
            if (j.contains(name)) {
              bounds.factors.push_back({j.at(name).at(0).get<double>(),
                                        j.at(name).at(1).get<double>()});
            } else {
              bounds.factors.push_back({1.0, 1.0});
            }
          }
        } else {
          bounds.factors.assign(model.event_names.size(), {err_lo, err_hi});
        }
        result = plan_bounded_error(candidates, model, bounds, knobs.cap_mw);
      }
      io::write_planner_result(out / "plan.csv", out / "plan.json", result,
                               seed, config_hash);
      std::cout << "wrote " << (out / "plan.csv").string() << "\n";
    } else if (*suite) {
      suite_cfg.seed = seed == 0 ? suite_cfg.seed : seed;
      const SuiteResult result = run_suite(suite_cfg);
      io::write_suite_result(out / "suite.csv", out / "suite_cells.csv", result,
                             seed, config_hash);
      std::cout << "wrote " << (out / "suite.csv").string() << "\n";
    }
  } catch (const RejectedInput& e) {
    std::cerr << "error: rejected_input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FitError& e) {
    std::cerr << "error: fit_error: " << e.what() << "\n";
    return kExitComputation;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return kExitComputation;
  }
  return 0;
}
