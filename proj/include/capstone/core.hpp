#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace capstone {

// Thrown when an operation receives input that violates its preconditions
// (negative power, NaN/inf fields, mismatched shapes, ...).
struct RejectedInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when an alternating fit diverges; carries the objective trace so the
// caller can inspect what happened.
struct FitError : std::runtime_error {
  FitError(const std::string& msg, std::vector<double> trace)
      : std::runtime_error(msg), objective_trace(std::move(trace)) {}
  std::vector<double> objective_trace;
};

bool is_finite(double v);
void require_finite(double v, const char* what);

// FNV-1a over a byte string, used for content hashes (graph ids, config
// hashes). Stable across platforms and runs.
std::uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

struct OperatingPoint {
  double voltage = 0.0;   // informational
  double freq_mhz = 100.0;
  std::string corner;

  bool operator==(const OperatingPoint&) const = default;
  void validate() const;
};

// Compiler-visible activity counts for one execution window.
struct EventVector {
  std::vector<std::string> names;
  std::vector<double> counts;

  std::size_t size() const { return names.size(); }
  void validate() const;
};

struct PowerRow {
  std::string path;
  double power_mw = 0.0;
};

// Per-row gate-level power vector with hierarchical row paths.
struct PowerReport {
  std::vector<PowerRow> rows;
  OperatingPoint op;

  double total() const;
  void validate() const;
};

// One (events, report) pair from a single execution of a kernel variant.
struct ActivitySample {
  std::string kernel;
  std::string variant;
  EventVector events;
  PowerReport report;

  void validate() const;
};

enum class ModelKind { hierarchical, aggregate };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

// Learned (W, alpha) energy model. In canonical form every nonzero column of
// W has unit L1 norm, so the effective coefficient beta equals alpha.
struct EnergyModel {
  std::vector<std::string> event_names;  // E
  std::vector<std::string> row_paths;    // R
  Eigen::MatrixXd W;                     // R x E, nonnegative
  Eigen::VectorXd alpha;                 // E, nonnegative
  double leak_mw = 0.0;
  OperatingPoint train_op;
  ModelKind kind = ModelKind::hierarchical;

  std::size_t num_events() const { return event_names.size(); }
  std::size_t num_rows() const { return row_paths.size(); }
  void validate() const;
};

// One pipelining-loop candidate.
struct PnrConfiguration {
  std::string graph_id;
  int iteration = 0;
  double freq_mhz = 100.0;
  int ii = 1;
  EventVector events;
  std::vector<double> features;  // diversity space phi(x)

  void validate() const;
};

// Merges duplicate paths by summation and sorts rows lexicographically.
// Total power is preserved.
PowerReport canonicalize_report(const std::vector<PowerRow>& raw,
                                const OperatingPoint& op = {});

// Samples re-expressed over the global (sorted-union) event and row orders,
// with missing entries zero-filled.
struct AlignedDataset {
  std::vector<std::string> event_names;
  std::vector<std::string> row_paths;
  std::vector<ActivitySample> samples;
};

AlignedDataset align_features(const std::vector<ActivitySample>& samples);

}  // namespace capstone
