#include "capstone/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace capstone::io {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RejectedInput("cannot open file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RejectedInput("cannot write file: " + path.string());
  out << data;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw RejectedInput(std::string("invalid number for ") + what + ": '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Data lines of a CSV file: comments (#) and blank lines stripped.
std::vector<std::string> csv_lines(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

json op_to_json(const OperatingPoint& op) {
  return {{"voltage", op.voltage}, {"freq_mhz", op.freq_mhz},
          {"corner", op.corner}};
}

OperatingPoint op_from_json(const json& j) {
  OperatingPoint op;
  op.voltage = j.at("voltage").get<double>();
  op.freq_mhz = j.at("freq_mhz").get<double>();
  op.corner = j.at("corner").get<std::string>();
  return op;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_header_block(long seed, const std::string& config_hash) {
  std::ostringstream os;
  os << "# " << kToolVersion << "\n# seed=" << seed
     << "\n# config_hash=" << config_hash << "\n";
  return os.str();
}

json json_header(long seed, const std::string& config_hash) {
  return {{"tool", kToolVersion}, {"seed", seed}, {"config_hash", config_hash}};
}

json model_to_json(const EnergyModel& model) {
  model.validate();
  json w = json::array();
  for (Eigen::Index e = 0; e < model.W.cols(); ++e) {
    for (Eigen::Index r = 0; r < model.W.rows(); ++r) {
      if (model.W(r, e) != 0.0) {
        w.push_back({r, e, model.W(r, e)});
      }
    }
  }
  json alpha = json::array();
  for (Eigen::Index e = 0; e < model.alpha.size(); ++e) {
    alpha.push_back(model.alpha(e));
  }
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(model.kind)},
          {"event_names", model.event_names},
          {"row_paths", model.row_paths},
          {"W", w},
          {"alpha", alpha},
          {"leak_mw", model.leak_mw},
          {"train_op", op_to_json(model.train_op)}};
}

EnergyModel model_from_json(const json& j) {
  if (j.at("format_version").get<int>() != kModelFormatVersion) {
    throw RejectedInput("unsupported model format_version");
  }
  EnergyModel m;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.event_names = j.at("event_names").get<std::vector<std::string>>();
  m.row_paths = j.at("row_paths").get<std::vector<std::string>>();
  m.leak_mw = j.at("leak_mw").get<double>();
  m.train_op = op_from_json(j.at("train_op"));
  const auto R = static_cast<Eigen::Index>(m.row_paths.size());
  const auto E = static_cast<Eigen::Index>(m.event_names.size());
  m.W = Eigen::MatrixXd::Zero(R, E);
  for (const auto& t : j.at("W")) {
    m.W(t.at(0).get<Eigen::Index>(), t.at(1).get<Eigen::Index>()) =
        t.at(2).get<double>();
  }
  m.alpha.resize(E);
  const auto& alpha = j.at("alpha");
  for (Eigen::Index e = 0; e < E; ++e) {
    m.alpha(e) = alpha.at(static_cast<std::size_t>(e)).get<double>();
  }
  m.validate();
  return m;
}

void save_model(const std::filesystem::path& path, const EnergyModel& model,
                long seed, const std::string& config_hash) {
  json j = model_to_json(model);
  j["header"] = json_header(seed, config_hash);
  write_file(path, j.dump(2) + "\n");
}

EnergyModel load_model(const std::filesystem::path& path) {
  return model_from_json(json::parse(read_file(path)));
}

ActivitySample load_sample(const std::filesystem::path& report_csv,
                           const std::filesystem::path& sidecar_json) {
  std::vector<PowerRow> rows;
  for (const auto& line : csv_lines(report_csv)) {
    const auto cells = split(line, ',');
    if (cells.size() != 2) {
      throw RejectedInput("power report row must be 'path,power_mw': " + line);
    }
    if (cells[0] == "path") continue;  // header row
    rows.push_back({cells[0], parse_double(cells[1], "power_mw")});
  }

  const json j = json::parse(read_file(sidecar_json));
  ActivitySample s;
  s.kernel = j.at("kernel").get<std::string>();
  s.variant = j.value("variant", std::string{});
  const OperatingPoint op = op_from_json(j.at("op_point"));
  for (const auto& [name, count] : j.at("events").items()) {
    s.events.names.push_back(name);
    s.events.counts.push_back(count.get<double>());
  }
  s.report = canonicalize_report(rows, op);
  s.validate();
  return s;
}

std::vector<ActivitySample> load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw RejectedInput("dataset dir does not exist: " + dir.string());
  }
  std::vector<std::filesystem::path> csvs;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".csv") csvs.push_back(e.path());
  }
  std::sort(csvs.begin(), csvs.end());
  std::vector<ActivitySample> samples;
  for (const auto& csv : csvs) {
    auto sidecar = csv;
    sidecar.replace_extension(".json");
    if (!std::filesystem::exists(sidecar)) {
      throw RejectedInput("missing sidecar for " + csv.string());
    }
    samples.push_back(load_sample(csv, sidecar));
  }
  if (samples.empty()) {
    throw RejectedInput("no samples found in " + dir.string());
  }
  return samples;
}

EventVector load_events_file(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  EventVector ev;
  for (const auto& [name, count] : j.at("events").items()) {
    ev.names.push_back(name);
    ev.counts.push_back(count.get<double>());
  }
  ev.validate();
  return ev;
}

std::vector<PnrConfiguration> load_candidates_csv(
    const std::filesystem::path& path) {
  const auto lines = csv_lines(path);
  if (lines.empty()) return {};
  const auto header = split(lines[0], ',');
  if (header.size() < 5 || header[0] != "iteration" ||
      header[1] != "graph_id" || header[2] != "freq_mhz" || header[3] != "ii" ||
      header.back() != "events") {
    throw RejectedInput("candidates CSV header must be "
                        "iteration,graph_id,freq_mhz,ii,feature_*,events");
  }
  const std::size_t n_features = header.size() - 5;

  std::vector<PnrConfiguration> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) {
      throw RejectedInput("candidates CSV row width mismatch: " + lines[i]);
    }
    PnrConfiguration x;
    x.iteration = static_cast<int>(parse_double(cells[0], "iteration"));
    x.graph_id = cells[1];
    x.freq_mhz = parse_double(cells[2], "freq_mhz");
    x.ii = static_cast<int>(parse_double(cells[3], "ii"));
    for (std::size_t f = 0; f < n_features; ++f) {
      x.features.push_back(parse_double(cells[4 + f], "feature"));
    }
    for (const auto& pair : split(cells.back(), ';')) {
      if (pair.empty()) continue;
      const auto eq = pair.find('=');
      if (eq == std::string::npos) {
        throw RejectedInput("bad event cell entry: " + pair);
      }
      x.events.names.push_back(pair.substr(0, eq));
      x.events.counts.push_back(parse_double(pair.substr(eq + 1), "event count"));
    }
    x.validate();
    out.push_back(std::move(x));
  }
  return out;
}

void write_candidates_csv(const std::filesystem::path& path,
                          const std::vector<PnrConfiguration>& candidates,
                          long seed, const std::string& config_hash) {
  std::size_t n_features = 0;
  for (const auto& x : candidates) {
    n_features = std::max(n_features, x.features.size());
  }
  std::ostringstream os;
  os << csv_header_block(seed, config_hash);
  os << "iteration,graph_id,freq_mhz,ii";
  for (std::size_t f = 0; f < n_features; ++f) os << ",feature_" << f + 1;
  os << ",events\n";
  for (const auto& x : candidates) {
    os << x.iteration << ',' << x.graph_id << ',' << format_double(x.freq_mhz)
       << ',' << x.ii;
    for (std::size_t f = 0; f < n_features; ++f) {
      os << ',' << format_double(f < x.features.size() ? x.features[f] : 0.0);
    }
    os << ',';
    for (std::size_t e = 0; e < x.events.names.size(); ++e) {
      if (e) os << ';';
      os << x.events.names[e] << '=' << format_double(x.events.counts[e]);
    }
    os << '\n';
  }
  write_file(path, os.str());
}

std::vector<CalibrationSample> load_calibration_csv(
    const std::filesystem::path& path) {
  std::vector<CalibrationSample> out;
  for (const auto& line : csv_lines(path)) {
    const auto cells = split(line, ',');
    if (cells.size() != 4) {
      throw RejectedInput("calibration row must be "
                          "ptpx_mw,pred_mw,group,freq_mhz: " + line);
    }
    if (cells[0] == "ptpx_mw") continue;
    out.push_back({parse_double(cells[0], "ptpx_mw"),
                   parse_double(cells[1], "pred_mw"), cells[2],
                   parse_double(cells[3], "freq_mhz")});
  }
  return out;
}

void write_planner_result(const std::filesystem::path& csv_path,
                          const std::filesystem::path& json_path,
                          const PlannerResult& result, long seed,
                          const std::string& config_hash) {
  std::ostringstream os;
  os << csv_header_block(seed, config_hash);
  os << "role,freq_mhz,pred_mw,upper_bound_mw,graph_id\n";
  for (const auto& c : result.selected) {
    os << to_string(c.role) << ',' << format_double(c.config.freq_mhz) << ','
       << format_double(c.pred_mw) << ',' << format_double(c.upper_bound_mw)
       << ',' << c.config.graph_id << '\n';
  }
  write_file(csv_path, os.str());

  json j = {{"header", json_header(seed, config_hash)},
            {"mode", to_string(result.mode)},
            {"stopped_at_iteration", result.stopped_at_iteration},
            {"note", result.note},
            {"num_selected", result.selected.size()},
            {"has_anchor", result.has_anchor()}};
  json sel = json::array();
  for (const auto& c : result.selected) {
    sel.push_back({{"role", to_string(c.role)},
                   {"graph_id", c.config.graph_id},
                   {"iteration", c.config.iteration},
                   {"freq_mhz", c.config.freq_mhz},
                   {"ii", c.config.ii},
                   {"pred_mw", c.pred_mw},
                   {"upper_bound_mw", c.upper_bound_mw}});
  }
  j["selected"] = sel;
  write_file(json_path, j.dump(2) + "\n");
}

void write_eval_report(const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path,
                       const EvalReport& report, long seed,
                       const std::string& config_hash) {
  std::ostringstream os;
  os << csv_header_block(seed, config_hash);
  os << "kernel,loocv_total_mape_pct,loocv_r2,mean_row_l2_mw\n";
  for (const auto& k : report.per_kernel) {
    os << k.kernel << ',' << format_double(k.loocv_total_mape_pct) << ','
       << (k.loocv_r2 == kUndefinedR2 ? "undefined"
                                      : format_double(k.loocv_r2))
       << ',' << format_double(k.mean_row_l2_mw) << '\n';
  }
  write_file(csv_path, os.str());

  json j = {{"header", json_header(seed, config_hash)},
            {"insample_mape_pct", report.insample_mape_pct},
            {"w_stability", report.w_stability}};
  json per = json::array();
  for (const auto& k : report.per_kernel) {
    json e = {{"kernel", k.kernel},
              {"loocv_total_mape_pct", k.loocv_total_mape_pct},
              {"mean_row_l2_mw", k.mean_row_l2_mw}};
    if (k.loocv_r2 == kUndefinedR2) {
      e["loocv_r2"] = "undefined";
    } else {
      e["loocv_r2"] = k.loocv_r2;
    }
    per.push_back(e);
  }
  j["per_kernel"] = per;
  write_file(json_path, j.dump(2) + "\n");
}

void write_suite_result(const std::filesystem::path& summary_csv,
                        const std::filesystem::path& cells_csv,
                        const SuiteResult& result, long seed,
                        const std::string& config_hash) {
  std::ostringstream os;
  os << csv_header_block(seed, config_hash);
  os << "controller,success_rate_pct,median_dcap_pct,p95_dcap_pct,"
        "avg_norm_freq,k_returned\n";
  for (const auto& s : result.summary) {
    os << to_string(s.planner) << ',' << format_double(s.success_rate_pct)
       << ',' << format_double(s.median_dcap_pct) << ','
       << format_double(s.p95_dcap_pct) << ',' << format_double(s.avg_norm_freq)
       << ',' << format_double(s.k_returned) << '\n';
  }
  write_file(summary_csv, os.str());

  std::ostringstream cs;
  cs << csv_header_block(seed, config_hash);
  cs << "kernel,cap_mw,controller,success,dcap_pct,norm_freq,k_returned,"
        "chosen_freq_mhz\n";
  for (const auto& c : result.cells) {
    cs << c.kernel << ',' << format_double(c.cap_mw) << ','
       << to_string(c.planner) << ',' << (c.success ? 1 : 0) << ','
       << (c.success ? format_double(c.dcap_pct) : std::string("nan")) << ','
       << format_double(c.norm_freq) << ',' << c.k_returned << ','
       << format_double(c.chosen_freq_mhz) << '\n';
  }
  write_file(cells_csv, cs.str());
}

void write_fit_report(const std::filesystem::path& json_path,
                      const FitReport& report, long seed,
                      const std::string& config_hash) {
  json j = {{"header", json_header(seed, config_hash)},
            {"converged", report.converged},
            {"iters_used", report.iters_used},
            {"objective_trace", report.objective_trace}};
  write_file(json_path, j.dump(2) + "\n");
}

}  // namespace capstone::io
