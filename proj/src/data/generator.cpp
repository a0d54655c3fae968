#include "mmal/data/generator.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "mmal/errors.hpp"

namespace mmal::data {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void GeneratorConfig::validate() const {
  if (schema.steps == 0 || schema.modalities.empty())
    throw ConfigError("generator: schema needs steps and modalities");
  for (const auto& m : schema.modalities)
    if (m.dim == 0) throw ConfigError("generator: modality " + m.name + " has zero dimension");
  if (train_subjects == 0) throw ConfigError("generator: need at least one training subject");
  if (windows_per_subject == 0) throw ConfigError("generator: windows_per_subject must be positive");
  if (!modality_strength.empty() && modality_strength.size() != schema.modalities.size())
    throw ConfigError("generator: modality_strength needs one entry per modality");
  if (class_separation < 0 || subject_shift < 0 || noise_scale < 0)
    throw ConfigError("generator: scales must be non-negative");
  if (temporal_smoothness < 0 || temporal_smoothness >= 1)
    throw ConfigError("generator: temporal_smoothness must be in [0, 1)");
  if (prior_concentration <= 0) throw ConfigError("generator: prior_concentration must be positive");
  if (missing_class_probability < 0 || missing_class_probability > 1)
    throw ConfigError("generator: missing_class_probability must be in [0, 1]");
  if (subject_priors.size() > train_subjects + test_subjects)
    throw ConfigError("generator: more explicit priors than subjects");
  for (const auto& prior : subject_priors) {
    double total = 0;
    for (double p : prior) {
      if (p < 0) throw ConfigError("generator: negative class prior");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("generator: class priors must sum to 1");
  }
}

namespace {

struct Prototype {
  std::vector<Matrix> per_modality;  // steps x dim
};

std::array<double, kNumClasses> draw_prior(const GeneratorConfig& cfg, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(cfg.prior_concentration, 1.0);
  std::array<double, kNumClasses> prior{};
  for (double& p : prior) p = gamma(rng);
  std::bernoulli_distribution drop(cfg.missing_class_probability);
  if (drop(rng)) {
    std::uniform_int_distribution<std::size_t> which(0, kNumClasses - 1);
    prior[which(rng)] = 0.0;
  }
  double total = std::accumulate(prior.begin(), prior.end(), 0.0);
  if (total <= 0) {
    prior.fill(1.0);
    total = kNumClasses;
  }
  for (double& p : prior) p /= total;
  return prior;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : m.values()) v = stddev * normal(rng);
  return m;
}

SubjectSession make_subject(const GeneratorConfig& cfg, const std::vector<Prototype>& protos,
                            const std::string& id, std::size_t subject_index, std::size_t windows) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + subject_index));
  const auto& schema = cfg.schema;
  const std::size_t T = schema.steps;

  const auto prior = subject_index < cfg.subject_priors.size() ? cfg.subject_priors[subject_index]
                                                               : draw_prior(cfg, rng);

  // Persistent subject offsets: a class-independent part and a class-specific part.
  std::vector<Matrix> shared(schema.modalities.size());
  std::vector<std::vector<Matrix>> specific(kNumClasses);
  for (std::size_t m = 0; m < schema.modalities.size(); ++m)
    shared[m] = random_matrix(1, schema.modalities[m].dim, cfg.subject_shift, rng);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t m = 0; m < schema.modalities.size(); ++m)
      specific[c].push_back(random_matrix(1, schema.modalities[m].dim, 0.5 * cfg.subject_shift, rng));

  std::discrete_distribution<std::size_t> label_dist(prior.begin(), prior.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = cfg.temporal_smoothness;
  const double innovation = std::sqrt(1.0 - rho * rho);

  SubjectSession session;
  session.subject_id = id;
  for (std::size_t i = 0; i < windows; ++i) {
    MultiModalWindow w;
    w.subject_id = id;
    w.index = i;
    const std::size_t label = label_dist(rng);
    w.label = label;
    for (std::size_t m = 0; m < schema.modalities.size(); ++m) {
      const std::size_t dim = schema.modalities[m].dim;
      Matrix x = protos[label].per_modality[m];
      for (std::size_t d = 0; d < dim; ++d) {
        double noise = cfg.noise_scale * normal(rng);
        for (std::size_t t = 0; t < T; ++t) {
          if (t > 0) noise = rho * noise + innovation * cfg.noise_scale * normal(rng);
          x(t, d) += shared[m][d] + specific[label][m][d] + noise;
        }
      }
      w.modalities.push_back(std::move(x));
    }
    session.windows.push_back(std::move(w));
  }
  return session;
}

std::string subject_name(const char* prefix, std::size_t i) {
  std::string n = std::to_string(i);
  if (n.size() < 2) n.insert(0, 2 - n.size(), '0');
  return prefix + n;
}

}  // namespace

Dataset generate(const GeneratorConfig& config) {
  config.validate();
  const auto& schema = config.schema;
  std::mt19937_64 group_rng(derive_seed(config.seed, 0));

  std::vector<Prototype> protos(kNumClasses);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t m = 0; m < schema.modalities.size(); ++m) {
      const double strength = config.modality_strength.empty() ? 1.0 : config.modality_strength[m];
      const double sd = config.class_separation * strength;
      const std::size_t dim = schema.modalities[m].dim;
      const Matrix level = random_matrix(1, dim, sd, group_rng);
      const Matrix amplitude = random_matrix(1, dim, 0.5 * sd, group_rng);
      Matrix seq(schema.steps, dim);
      for (std::size_t d = 0; d < dim; ++d) {
        const double phi = phase(group_rng);
        for (std::size_t t = 0; t < schema.steps; ++t) {
          const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) /
                                   static_cast<double>(schema.steps) + phi;
          seq(t, d) = level[d] + amplitude[d] * std::sin(angle);
        }
      }
      protos[c].per_modality.push_back(std::move(seq));
    }
  }

  Dataset dataset;
  dataset.schema = schema;
  for (std::size_t s = 0; s < config.train_subjects; ++s)
    dataset.train.push_back(make_subject(config, protos, subject_name("train", s), s, config.windows_per_subject));
  for (std::size_t s = 0; s < config.test_subjects; ++s)
    dataset.test.push_back(
        make_subject(config, protos, subject_name("test", s), config.train_subjects + s,
                     config.test_windows_per_subject > 0 ? config.test_windows_per_subject
                                                         : config.windows_per_subject));
  return dataset;
}

}  // namespace mmal::data
