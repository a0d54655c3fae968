#include "mmal/models/checkpoint.hpp"

#include <fstream>

#include "mmal/data/dataset_io.hpp"
#include "mmal/errors.hpp"

namespace mmal::models {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

void load_matrix(const json& j, Matrix& into, const std::string& what) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  if (rows != into.rows() || cols != into.cols())
    throw ConfigError("checkpoint: " + what + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", expected " + into.shape_string());
  into = Matrix(rows, cols, j.at("data").get<std::vector<double>>());
}

json params_json(const std::vector<const Parameter*>& params) {
  json out = json::array();
  for (const auto* p : params) out.push_back({{"name", p->name}, {"value", matrix_json(p->value)}});
  return out;
}

void load_params(const json& j, const std::vector<Parameter*>& params) {
  if (!j.is_array() || j.size() != params.size()) throw ConfigError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = j[i].at("name").get<std::string>();
    if (name != params[i]->name)
      throw ConfigError("checkpoint: expected parameter '" + params[i]->name + "', found '" + name + "'");
    load_matrix(j[i].at("value"), params[i]->value, name);
    params[i]->zero_grad();
  }
}

json adam_json(const numerics::AdamConfig& a) {
  return {{"learning_rate", a.learning_rate},
          {"beta1", a.beta1},
          {"beta2", a.beta2},
          {"epsilon", a.epsilon},
          {"max_grad_norm", a.max_grad_norm}};
}

numerics::AdamConfig adam_from(const json& j) {
  numerics::AdamConfig a;
  a.learning_rate = j.at("learning_rate").get<double>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.epsilon = j.at("epsilon").get<double>();
  a.max_grad_norm = j.at("max_grad_norm").get<double>();
  return a;
}

std::string fusion_string(const FusionMode& mode) {
  switch (mode.kind) {
    case FusionMode::Kind::kModelLevel:
      return "model";
    case FusionMode::Kind::kFeatureLevel:
      return "feature";
    case FusionMode::Kind::kSingleModality:
      return "modality:" + std::to_string(mode.modality);
  }
  return "model";
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed content: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("checkpoint: inconsistent content: ") + e.what());
  }
}

}  // namespace

json to_json(const ClassifierEnsemble& ensemble) {
  json members = json::array();
  for (const auto& m : ensemble.members()) {
    const auto& c = m.config();
    members.push_back({{"input_dim", c.input_dim},
                       {"steps", c.steps},
                       {"hidden", c.hidden},
                       {"num_classes", c.num_classes},
                       {"sigmoid_head", c.sigmoid_head},
                       {"adam", adam_json(m.optimizer().config())},
                       {"parameters", params_json(m.parameters())}});
  }
  json schema;
  data::to_json(schema, ensemble.schema());
  return {{"schema", schema},
          {"fusion", fusion_string(ensemble.mode())},
          {"train", {{"epochs", ensemble.train_options().epochs}, {"batch_size", ensemble.train_options().batch_size}}},
          {"members", members}};
}

ClassifierEnsemble ensemble_from_json(const json& j) {
  return guarded([&] {
    data::DatasetSchema schema;
    data::from_json(j.at("schema"), schema);
    const auto mode = FusionMode::parse(j.at("fusion").get<std::string>(), schema);
    ClassifierTrainOptions train;
    train.epochs = j.at("train").at("epochs").get<std::size_t>();
    train.batch_size = j.at("train").at("batch_size").get<std::size_t>();
    std::mt19937_64 rng(0);
    std::vector<SequenceClassifier> members;
    for (const auto& mj : j.at("members")) {
      ClassifierConfig c;
      c.input_dim = mj.at("input_dim").get<std::size_t>();
      c.steps = mj.at("steps").get<std::size_t>();
      c.hidden = mj.at("hidden").get<std::size_t>();
      c.num_classes = mj.at("num_classes").get<std::size_t>();
      c.sigmoid_head = mj.at("sigmoid_head").get<bool>();
      SequenceClassifier member(c, adam_from(mj.at("adam")), rng);
      load_params(mj.at("parameters"), member.parameters());
      members.push_back(std::move(member));
    }
    auto ensemble = ClassifierEnsemble::from_members(schema, mode, std::move(members), train);
    const auto views = ensemble.views();
    for (std::size_t k = 0; k < views.size(); ++k) {
      std::size_t dim = 0;
      for (std::size_t m : views[k]) dim += schema.modalities[m].dim;
      if (ensemble.members()[k].config().input_dim != dim || ensemble.members()[k].config().steps != schema.steps)
        throw ConfigError("checkpoint: member " + std::to_string(k) + " does not match the schema");
    }
    return ensemble;
  });
}

json to_json(const QNetwork& q) {
  const auto& c = q.config();
  return {{"input_dim", c.input_dim},
          {"steps", c.steps},
          {"hidden", c.hidden},
          {"adam", adam_json(q.optimizer().config())},
          {"parameters", params_json(q.parameters())}};
}

QNetwork qnetwork_from_json(const json& j) {
  return guarded([&] {
    QNetworkConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.steps = j.at("steps").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    std::mt19937_64 rng(0);
    QNetwork q(c, adam_from(j.at("adam")), rng);
    load_params(j.at("parameters"), q.parameters());
    return q;
  });
}

json to_json(const ModelBundle& bundle) {
  return {{"format", "mmal-checkpoint"},
          {"version", kCheckpointVersion},
          {"strategy", bundle.strategy},
          {"ensemble", to_json(bundle.ensemble)},
          {"policy", bundle.policy ? to_json(*bundle.policy) : json(nullptr)}};
}

ModelBundle bundle_from_json(const json& j) {
  return guarded([&] {
    if (!j.is_object() || j.value("format", std::string()) != "mmal-checkpoint")
      throw ConfigError("checkpoint: not an mmal checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ConfigError("checkpoint: unsupported version " + j.at("version").dump());
    ModelBundle b;
    b.strategy = j.at("strategy").get<std::string>();
    b.ensemble = ensemble_from_json(j.at("ensemble"));
    if (!j.at("policy").is_null()) b.policy = qnetwork_from_json(j.at("policy"));
    return b;
  });
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("checkpoint: cannot write " + path.string());
  out << to_json(bundle).dump() << '\n';
  if (!out) throw ConfigError("checkpoint: write failed for " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("checkpoint: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint: " + path.string() + " is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace mmal::models
