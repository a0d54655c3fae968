#include "mmal/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "mmal/data/dataset_io.hpp"
#include "mmal/errors.hpp"
#include "mmal/models/ensemble.hpp"

namespace mmal::harness {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw ConfigError("experiment: strategies must not be empty");
  if (fusions.empty()) throw ConfigError("experiment: fusions must not be empty");
  if (budgets.empty()) throw ConfigError("experiment: budgets must not be empty");
  for (std::size_t b : budgets)
    if (b == 0) throw ConfigError("experiment: budgets must be >= 1 (use evaluate for B = 0)");
  if (seeds == 0) throw ConfigError("experiment: seeds must be >= 1");
  if (personalization_repeats == 0) throw ConfigError("experiment: personalization repeats must be >= 1");
  if (!dataset_path) generator.validate();
  train.validate();
}

std::vector<std::string> expand_fusions(const std::vector<std::string>& fusions,
                                        const data::DatasetSchema& schema) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  const auto add = [&](const std::string& name) {
    const auto canonical = models::FusionMode::parse(name, schema).name(schema);
    if (seen.insert(canonical).second) out.push_back(canonical);
  };
  for (const auto& f : fusions) {
    if (f == "per-modality") {
      for (const auto& m : schema.modalities) add(m.name);
    } else {
      add(f);
    }
  }
  return out;
}

json to_json(const data::GeneratorConfig& g) {
  json schema;
  data::to_json(schema, g.schema);
  json priors = json::array();
  for (const auto& p : g.subject_priors) priors.push_back(p);
  return {{"schema", schema},
          {"train_subjects", g.train_subjects},
          {"test_subjects", g.test_subjects},
          {"windows_per_subject", g.windows_per_subject},
          {"test_windows_per_subject", g.test_windows_per_subject},
          {"class_separation", g.class_separation},
          {"modality_strength", g.modality_strength},
          {"subject_shift", g.subject_shift},
          {"temporal_smoothness", g.temporal_smoothness},
          {"noise_scale", g.noise_scale},
          {"prior_concentration", g.prior_concentration},
          {"missing_class_probability", g.missing_class_probability},
          {"subject_priors", priors},
          {"seed", g.seed}};
}

data::GeneratorConfig generator_from_json(const json& j) {
  data::GeneratorConfig g;
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "desk") {
      g.schema = data::desk_schema();
    } else if (preset == "full") {
      g.schema = data::full_schema();
    } else {
      throw ConfigError("generator: unknown preset '" + preset + "' (expected desk or full)");
    }
  }
  if (j.contains("schema")) data::from_json(j.at("schema"), g.schema);
  g.train_subjects = j.value("train_subjects", g.train_subjects);
  g.test_subjects = j.value("test_subjects", g.test_subjects);
  g.windows_per_subject = j.value("windows_per_subject", g.windows_per_subject);
  g.test_windows_per_subject = j.value("test_windows_per_subject", g.test_windows_per_subject);
  g.class_separation = j.value("class_separation", g.class_separation);
  g.modality_strength = j.value("modality_strength", g.modality_strength);
  g.subject_shift = j.value("subject_shift", g.subject_shift);
  g.temporal_smoothness = j.value("temporal_smoothness", g.temporal_smoothness);
  g.noise_scale = j.value("noise_scale", g.noise_scale);
  g.prior_concentration = j.value("prior_concentration", g.prior_concentration);
  g.missing_class_probability = j.value("missing_class_probability", g.missing_class_probability);
  if (j.contains("subject_priors"))
    g.subject_priors = j.at("subject_priors").get<std::vector<std::array<double, data::kNumClasses>>>();
  g.seed = j.value("seed", g.seed);
  g.validate();
  return g;
}

json to_json(const ExperimentConfig& c) {
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(trainer::to_string(s));
  json train;
  trainer::to_json(train, c.train);
  return {{"dataset", c.dataset_path ? json(c.dataset_path->string()) : json(nullptr)},
          {"generator", to_json(c.generator)},
          {"normalize", c.normalize},
          {"strategies", strategies},
          {"fusions", c.fusions},
          {"budgets", c.budgets},
          {"seeds", c.seeds},
          {"master_seed", c.master_seed},
          {"personalization", {{"repeats", c.personalization_repeats}, {"epochs", c.personalization_epochs}}},
          {"train", train},
          {"output_dir", c.output_dir.string()},
          {"threads", c.threads}};
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment: config must be a JSON object");
  try {
    ExperimentConfig c;
    if (j.contains("dataset") && !j.at("dataset").is_null())
      c.dataset_path = std::filesystem::path(j.at("dataset").get<std::string>());
    if (j.contains("generator")) c.generator = generator_from_json(j.at("generator"));
    c.normalize = j.value("normalize", c.normalize);
    if (j.contains("strategies")) {
      c.strategies.clear();
      for (const auto& s : j.at("strategies")) c.strategies.push_back(trainer::parse_strategy(s.get<std::string>()));
    }
    c.fusions = j.value("fusions", c.fusions);
    c.budgets = j.value("budgets", c.budgets);
    c.seeds = j.value("seeds", c.seeds);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("personalization")) {
      const auto& p = j.at("personalization");
      c.personalization_repeats = p.value("repeats", c.personalization_repeats);
      c.personalization_epochs = p.value("epochs", c.personalization_epochs);
    }
    const auto schema = experiment_schema(c);
    if (j.contains("train")) c.train = trainer::train_config_from_json(j.at("train"), schema);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.threads = j.value("threads", c.threads);
    c.fusions = expand_fusions(c.fusions, schema);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment: malformed config: ") + e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("experiment: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

void apply_environment(ExperimentConfig& config) {
  if (const char* dir = std::getenv("MMAL_OUTPUT_DIR"); dir != nullptr && *dir != '\0') config.output_dir = dir;
}

data::DatasetSchema experiment_schema(const ExperimentConfig& config) {
  if (!config.dataset_path) return config.generator.schema;
  std::ifstream in(*config.dataset_path / "manifest.json");
  if (!in) throw ConfigError("experiment: no manifest.json in " + config.dataset_path->string());
  json manifest;
  in >> manifest;
  data::DatasetSchema schema;
  data::from_json(manifest.at("schema"), schema);
  return schema;
}

}  // namespace mmal::harness
