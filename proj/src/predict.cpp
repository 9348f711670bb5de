#include "capstone/predict.hpp"

#include <map>

namespace capstone {

namespace {

Eigen::VectorXd event_counts(const EnergyModel& model,
                             const EventVector& events) {
  events.validate();
  if (events.names != model.event_names) {
    throw RejectedInput("predict: event names do not match the model");
  }
  return Eigen::Map<const Eigen::VectorXd>(
      events.counts.data(), static_cast<Eigen::Index>(events.counts.size()));
}

}  // namespace

Eigen::VectorXd effective_beta(const EnergyModel& model) {
  return model.W.colwise().sum().transpose().cwiseProduct(model.alpha);
}

std::vector<double> predict_rows(const EnergyModel& model,
                                 const EventVector& events) {
  const Eigen::VectorXd x = event_counts(model, events);
  const Eigen::VectorXd y = model.W * model.alpha.cwiseProduct(x);
  std::vector<double> out(y.data(), y.data() + y.size());
  if (model.leak_mw > 0) out.push_back(model.leak_mw);
  return out;
}

double predict_total(const EnergyModel& model, const EventVector& events) {
  const Eigen::VectorXd x = event_counts(model, events);
  return effective_beta(model).dot(x) + model.leak_mw;
}

double predict_power_at(const EnergyModel& model, const EventVector& events,
                        double freq_mhz) {
  require_finite(freq_mhz, "freq_mhz");
  if (freq_mhz <= 0) throw RejectedInput("predict_power_at: freq_mhz must be > 0");
  const Eigen::VectorXd x = event_counts(model, events);
  const double dynamic = effective_beta(model).dot(x);
  return (freq_mhz / model.train_op.freq_mhz) * dynamic + model.leak_mw;
}

Prediction predict(const EnergyModel& model, const EventVector& events) {
  Prediction p;
  p.rows_mw = predict_rows(model, events);
  p.total_mw = predict_total(model, events);
  const Eigen::VectorXd beta = effective_beta(model);
  p.beta.assign(beta.data(), beta.data() + beta.size());
  return p;
}

EventVector project_events(const EnergyModel& model,
                           const EventVector& events) {
  events.validate();
  std::map<std::string, double> by_name;
  for (std::size_t i = 0; i < events.names.size(); ++i) {
    by_name[events.names[i]] = events.counts[i];
  }
  EventVector out;
  out.names = model.event_names;
  out.counts.reserve(model.event_names.size());
  for (const auto& n : model.event_names) {
    auto it = by_name.find(n);
    out.counts.push_back(it == by_name.end() ? 0.0 : it->second);
  }
  return out;
}

}  // namespace capstone
