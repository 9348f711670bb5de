#include "capstone/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace capstone {

bool is_finite(double v) { return std::isfinite(v); }

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw RejectedInput(std::string(what) + " must be finite");
  }
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& data) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

void OperatingPoint::validate() const {
  require_finite(voltage, "OperatingPoint.voltage");
  require_finite(freq_mhz, "OperatingPoint.freq_mhz");
  if (freq_mhz <= 0) throw RejectedInput("OperatingPoint.freq_mhz must be > 0");
}

void EventVector::validate() const {
  if (counts.size() != names.size()) {
    throw RejectedInput("EventVector: counts.size() != names.size()");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!seen.insert(names[i]).second) {
      throw RejectedInput("EventVector: duplicate event name '" + names[i] + "'");
    }
    require_finite(counts[i], "EventVector.count");
    if (counts[i] < 0) {
      throw RejectedInput("EventVector: negative count for '" + names[i] + "'");
    }
  }
}

double PowerReport::total() const {
  double t = 0.0;
  for (const auto& r : rows) t += r.power_mw;
  return t;
}

void PowerReport::validate() const {
  op.validate();
  std::set<std::string> seen;
  for (const auto& r : rows) {
    require_finite(r.power_mw, "PowerReport.power_mw");
    if (r.power_mw < 0) {
      throw RejectedInput("PowerReport: negative power for '" + r.path + "'");
    }
    if (!seen.insert(r.path).second) {
      throw RejectedInput("PowerReport: duplicate path '" + r.path + "'");
    }
  }
}

void ActivitySample::validate() const {
  if (kernel.empty()) throw RejectedInput("ActivitySample: empty kernel label");
  events.validate();
  report.validate();
}

const char* to_string(ModelKind kind) {
  return kind == ModelKind::hierarchical ? "hierarchical" : "aggregate";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "hierarchical") return ModelKind::hierarchical;
  if (s == "aggregate") return ModelKind::aggregate;
  throw RejectedInput("unknown model kind '" + s + "'");
}

void EnergyModel::validate() const {
  train_op.validate();
  const auto R = static_cast<Eigen::Index>(row_paths.size());
  const auto E = static_cast<Eigen::Index>(event_names.size());
  if (W.rows() != R || W.cols() != E) {
    throw RejectedInput("EnergyModel: W shape does not match row/event labels");
  }
  if (alpha.size() != E) {
    throw RejectedInput("EnergyModel: alpha size does not match event labels");
  }
  if (!W.allFinite() || !alpha.allFinite()) {
    throw RejectedInput("EnergyModel: non-finite entries");
  }
  if (W.size() > 0 && W.minCoeff() < 0) {
    throw RejectedInput("EnergyModel: negative entries in W");
  }
  if (alpha.size() > 0 && alpha.minCoeff() < 0) {
    throw RejectedInput("EnergyModel: negative entries in alpha");
  }
  require_finite(leak_mw, "EnergyModel.leak_mw");
  if (leak_mw < 0) throw RejectedInput("EnergyModel: negative leak_mw");
}

void PnrConfiguration::validate() const {
  require_finite(freq_mhz, "PnrConfiguration.freq_mhz");
  if (freq_mhz <= 0) throw RejectedInput("PnrConfiguration.freq_mhz must be > 0");
  if (ii < 1) throw RejectedInput("PnrConfiguration.ii must be >= 1");
  events.validate();
  for (double f : features) require_finite(f, "PnrConfiguration.feature");
}

PowerReport canonicalize_report(const std::vector<PowerRow>& raw,
                                const OperatingPoint& op) {
  std::map<std::string, double> merged;
  for (const auto& r : raw) {
    require_finite(r.power_mw, "PowerRow.power_mw");
    if (r.power_mw < 0) {
      throw RejectedInput("canonicalize_report: negative power for '" + r.path + "'");
    }
    merged[r.path] += r.power_mw;
  }
  PowerReport out;
  out.op = op;
  out.rows.reserve(merged.size());
  for (const auto& [path, mw] : merged) out.rows.push_back({path, mw});
  return out;
}

AlignedDataset align_features(const std::vector<ActivitySample>& samples) {
  if (samples.empty()) {
    throw RejectedInput("align_features: empty sample list");
  }
  std::set<std::string> events, rows;
  for (const auto& s : samples) {
    s.validate();
    for (const auto& n : s.events.names) events.insert(n);
    for (const auto& r : s.report.rows) rows.insert(r.path);
  }

  AlignedDataset out;
  out.event_names.assign(events.begin(), events.end());
  out.row_paths.assign(rows.begin(), rows.end());

  for (const auto& s : samples) {
    ActivitySample a;
    a.kernel = s.kernel;
    a.variant = s.variant;
    a.events.names = out.event_names;
    a.events.counts.assign(out.event_names.size(), 0.0);
    std::map<std::string, double> ev;
    for (std::size_t i = 0; i < s.events.names.size(); ++i) {
      ev[s.events.names[i]] = s.events.counts[i];
    }
    for (std::size_t i = 0; i < out.event_names.size(); ++i) {
      auto it = ev.find(out.event_names[i]);
      if (it != ev.end()) a.events.counts[i] = it->second;
    }
    std::map<std::string, double> rp;
    for (const auto& r : s.report.rows) rp[r.path] = r.power_mw;
    a.report.op = s.report.op;
    a.report.rows.reserve(out.row_paths.size());
    for (const auto& path : out.row_paths) {
      auto it = rp.find(path);
      a.report.rows.push_back({path, it == rp.end() ? 0.0 : it->second});
    }
    out.samples.push_back(std::move(a));
  }
  return out;
}

}  // namespace capstone
