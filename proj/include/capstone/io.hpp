#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "capstone/eval.hpp"
#include "capstone/harness.hpp"
#include "capstone/planners.hpp"

namespace capstone::io {

inline constexpr const char* kToolVersion = "capstone 0.1.0";
inline constexpr int kModelFormatVersion = 1;

// Shortest representation that round-trips exactly.
std::string format_double(double v);

// Header block stamped on every output file (CSV: '#' comments; JSON: a
// "header" object). Reruns with identical inputs produce identical bytes.
std::string csv_header_block(long seed, const std::string& config_hash);
nlohmann::json json_header(long seed, const std::string& config_hash);

nlohmann::json model_to_json(const EnergyModel& model);
EnergyModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const EnergyModel& model,
                long seed, const std::string& config_hash);
EnergyModel load_model(const std::filesystem::path& path);

// One sample = CSV power report (path,power_mw) + JSON sidecar
// {kernel, variant, op_point:{voltage,freq_mhz,corner}, events:{name:count}}.
ActivitySample load_sample(const std::filesystem::path& report_csv,
                           const std::filesystem::path& sidecar_json);

// Pairs every *.csv in the directory with its *.json sidecar, sorted by stem.
std::vector<ActivitySample> load_dataset_dir(const std::filesystem::path& dir);

// {"events": {name: count}} (sidecar files work too).
EventVector load_events_file(const std::filesystem::path& path);

// CSV: iteration,graph_id,freq_mhz,ii,feature_1..feature_n,events with the
// events cell encoded name=count;name=count.
std::vector<PnrConfiguration> load_candidates_csv(
    const std::filesystem::path& path);
void write_candidates_csv(const std::filesystem::path& path,
                          const std::vector<PnrConfiguration>& candidates,
                          long seed, const std::string& config_hash);

// CSV: ptpx_mw,pred_mw,group,freq_mhz.
std::vector<CalibrationSample> load_calibration_csv(
    const std::filesystem::path& path);

void write_planner_result(const std::filesystem::path& csv_path,
                          const std::filesystem::path& json_path,
                          const PlannerResult& result, long seed,
                          const std::string& config_hash);

void write_eval_report(const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path,
                       const EvalReport& report, long seed,
                       const std::string& config_hash);

void write_suite_result(const std::filesystem::path& summary_csv,
                        const std::filesystem::path& cells_csv,
                        const SuiteResult& result, long seed,
                        const std::string& config_hash);

void write_fit_report(const std::filesystem::path& json_path,
                      const FitReport& report, long seed,
                      const std::string& config_hash);

}  // namespace capstone::io
