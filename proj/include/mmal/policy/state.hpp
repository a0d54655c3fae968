#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "mmal/fusion/fusion.hpp"
#include "mmal/models/ensemble.hpp"
#include "mmal/models/qnetwork.hpp"

namespace mmal::policy {

using numerics::Matrix;

/// What the Q-network sees for a window.
enum class StateMode {
  /// Per-member class probabilities followed by that member's confidence ("cont=0").
  kClassifierOutput,
  /// The window's raw concatenated features as a T-step sequence ("cont=1").
  kRawFeatures,
};

StateMode parse_state_mode(std::string_view text);
std::string to_string(StateMode mode);

struct PolicyState {
  StateMode mode = StateMode::kClassifierOutput;
  /// (1 x M(K+1)) for classifier-output states, (T x sum D_m) for raw features.
  Matrix values;

  std::size_t length() const { return values.size(); }
};

/// [p^(1), C^(1), ..., p^(M), C^(M)] as a single-step state.
PolicyState classifier_output_state(const fusion::EnsembleOutput& outputs);

/// Features of every modality the ensemble consumes, concatenated per step.
PolicyState raw_feature_state(const data::MultiModalWindow& window,
                              const models::ClassifierEnsemble& ensemble);

/// Build from an already computed ensemble output (avoids a second forward pass).
PolicyState build_state(const data::MultiModalWindow& window, const fusion::EnsembleOutput& outputs,
                        const models::ClassifierEnsemble& ensemble, StateMode mode);
PolicyState build_state(const data::MultiModalWindow& window,
                        const models::ClassifierEnsemble& ensemble, StateMode mode);

/// Q-network input shape for a mode and ensemble.
models::QNetworkConfig qnetwork_shape(StateMode mode, const models::ClassifierEnsemble& ensemble,
                                      std::size_t hidden = 32);

}  // namespace mmal::policy
