#include "mmal/policy/state.hpp"

#include <set>

#include "mmal/errors.hpp"

namespace mmal::policy {

StateMode parse_state_mode(std::string_view text) {
  if (text == "cont0" || text == "0" || text == "classifier") return StateMode::kClassifierOutput;
  if (text == "cont1" || text == "1" || text == "raw") return StateMode::kRawFeatures;
  throw ConfigError("unknown state mode '" + std::string(text) + "' (expected cont0 or cont1)");
}

std::string to_string(StateMode mode) {
  return mode == StateMode::kClassifierOutput ? "cont0" : "cont1";
}

PolicyState classifier_output_state(const fusion::EnsembleOutput& outputs) {
  require(outputs.size() > 0, "build_state: no classifier outputs");
  std::vector<double> values;
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    values.insert(values.end(), outputs.probabilities[m].begin(), outputs.probabilities[m].end());
    values.push_back(outputs.confidences[m]);
  }
  return {StateMode::kClassifierOutput, Matrix::row(values)};
}

namespace {

std::vector<std::size_t> consumed_modalities(const models::ClassifierEnsemble& ensemble) {
  std::set<std::size_t> seen;
  for (const auto& view : ensemble.views()) seen.insert(view.begin(), view.end());
  return {seen.begin(), seen.end()};
}

}  // namespace

PolicyState raw_feature_state(const data::MultiModalWindow& window,
                              const models::ClassifierEnsemble& ensemble) {
  const auto modalities = consumed_modalities(ensemble);
  return {StateMode::kRawFeatures, fusion::feature_concat(window, modalities)};
}

PolicyState build_state(const data::MultiModalWindow& window, const fusion::EnsembleOutput& outputs,
                        const models::ClassifierEnsemble& ensemble, StateMode mode) {
  require(window.modalities.size() == ensemble.schema().modalities.size(),
          "build_state: window modalities do not match the ensemble schema");
  require(outputs.size() == ensemble.size(), "build_state: output count does not match ensemble");
  if (mode == StateMode::kClassifierOutput) return classifier_output_state(outputs);
  return raw_feature_state(window, ensemble);
}

PolicyState build_state(const data::MultiModalWindow& window,
                        const models::ClassifierEnsemble& ensemble, StateMode mode) {
  require(window.modalities.size() == ensemble.schema().modalities.size(),
          "build_state: window modalities do not match the ensemble schema");
  if (mode == StateMode::kRawFeatures) return raw_feature_state(window, ensemble);
  return classifier_output_state(ensemble.predict(window));
}

models::QNetworkConfig qnetwork_shape(StateMode mode, const models::ClassifierEnsemble& ensemble,
                                      std::size_t hidden) {
  models::QNetworkConfig cfg;
  cfg.hidden = hidden;
  if (mode == StateMode::kClassifierOutput) {
    cfg.steps = 1;
    cfg.input_dim = ensemble.size() * (data::kNumClasses + 1);
  } else {
    cfg.steps = ensemble.schema().steps;
    cfg.input_dim = 0;
    for (std::size_t m : consumed_modalities(ensemble)) cfg.input_dim += ensemble.schema().modalities[m].dim;
  }
  return cfg;
}

}  // namespace mmal::policy
