#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmal/models/ensemble.hpp"
#include "mmal/models/qnetwork.hpp"
#include "mmal/personalize/metrics.hpp"
#include "mmal/trainer/trainer.hpp"

namespace mmal::personalize {

/// Who decides which of the new subject's windows get expert labels.
struct QuerySource {
  trainer::Strategy strategy = trainer::Strategy::kMmqlCont0;
  /// Required for MMQL strategies; used greedily and never modified.
  const models::QNetwork* policy = nullptr;
};

struct PersonalizeOptions {
  std::size_t budget = 10;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
};

struct PersonalizationResult {
  std::string subject_id;
  std::size_t budget = 0;
  std::size_t budget_used = 0;
  /// Windows examined before the budget filled or the session ended.
  std::size_t scanned = 0;
  std::vector<std::size_t> queried_indices;
  std::vector<std::size_t> evaluated_indices;
  /// Group model on the evaluated windows.
  Metrics before;
  /// Adapted model on the same windows.
  Metrics after;
  /// Every window was queried; before/after are left at zero.
  bool evaluation_empty = false;
};

void to_json(nlohmann::json& j, const PersonalizationResult& r);

struct PersonalizationOutcome {
  PersonalizationResult result;
  models::ClassifierEnsemble adapted;
};

/// Shuffle the session, let `source` pick up to `budget` windows to label,
/// fine-tune a copy of the ensemble on them (fresh optimizer state) and
/// score the remaining windows with majority vote before and after.
/// budget = 0 evaluates the group model only.
PersonalizationOutcome personalize_subject(const data::SubjectSession& session,
                                           const models::ClassifierEnsemble& ensemble,
                                           const QuerySource& source, const PersonalizeOptions& options);

}  // namespace mmal::personalize
