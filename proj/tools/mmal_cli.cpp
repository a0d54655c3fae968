#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "mmal/data/dataset_io.hpp"
#include "mmal/data/generator.hpp"
#include "mmal/data/preprocess.hpp"
#include "mmal/errors.hpp"
#include "mmal/harness/config.hpp"
#include "mmal/harness/grid.hpp"
#include "mmal/harness/report.hpp"
#include "mmal/models/checkpoint.hpp"
#include "mmal/personalize/personalize.hpp"
#include "mmal/trainer/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmal;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

/// MMAL_OUTPUT_DIR overrides the default when the flag was not given.
fs::path output_dir(const CLI::Option* flag, const fs::path& value) {
  if (flag->count() == 0)
    if (const char* env = std::getenv("MMAL_OUTPUT_DIR"); env && *env) return env;
  return value;
}

data::Dataset load_prepared(const fs::path& dir, bool raw) {
  auto dataset = data::load_dataset(dir);
  if (!raw) data::zscore_fit_apply(dataset);
  return dataset;
}

struct GenerateArgs {
  fs::path config, out = "mmal_out/data";
  std::optional<std::uint64_t> seed;
  std::optional<double> shift;
  std::string preset;
};

int run_generate(const GenerateArgs& a, const CLI::Option* out_flag) {
  data::GeneratorConfig g;
  if (!a.config.empty()) {
    auto j = read_json_file(a.config);
    if (j.contains("generator")) j = j["generator"];
    g = harness::generator_from_json(j);
  }
  if (a.preset == "full") g.schema = data::full_schema();
  if (a.preset == "desk") g.schema = data::desk_schema();
  if (a.seed) g.seed = *a.seed;
  if (a.shift) g.subject_shift = *a.shift;
  g.validate();
  const auto dir = output_dir(out_flag, a.out);
  data::save_dataset(dir, data::generate(g));
  std::cout << json{{"dataset", dir.string()}, {"generator", harness::to_json(g)}}.dump() << '\n';
  return 0;
}

struct TrainArgs {
  fs::path data, config, out = "mmal_out/train";
  std::string strategy, fusion;
  std::optional<std::size_t> budget, episodes;
  std::optional<std::uint64_t> seed;
  bool raw = false;
};

int run_train(const TrainArgs& a, const CLI::Option* out_flag) {
  const auto dataset = load_prepared(a.data, a.raw);
  trainer::TrainConfig tc;
  if (!a.config.empty()) {
    auto j = read_json_file(a.config);
    if (j.contains("train")) j = j["train"];
    tc = trainer::train_config_from_json(j, dataset.schema);
  }
  if (!a.strategy.empty()) tc.strategy = trainer::parse_strategy(a.strategy);
  if (!a.fusion.empty()) tc.fusion = models::FusionMode::parse(a.fusion, dataset.schema);
  if (a.budget) tc.budget = *a.budget;
  if (a.episodes) tc.episodes = *a.episodes;
  if (a.seed) tc.seed = *a.seed;
  tc.validate();

  auto result = trainer::train(dataset, tc);
  const auto dir = output_dir(out_flag, a.out);
  models::ModelBundle bundle{std::move(result.ensemble), std::move(result.policy), trainer::to_string(tc.strategy)};
  models::save_checkpoint(dir / "checkpoint.json", bundle);
  std::string lines;
  for (const auto& log : result.logs) lines += json(log).dump() + "\n";
  write_text(dir / "episodes.jsonl", lines);
  json config;
  trainer::to_json(config, tc);
  write_text(dir / "train_config.json", config.dump(2) + "\n");
  std::cout << json{{"checkpoint", (dir / "checkpoint.json").string()}, {"episodes", result.logs.size()}}.dump()
            << '\n';
  return 0;
}

struct PersonalizeArgs {
  fs::path data, checkpoint, out;
  std::size_t budget = 10, epochs = 10;
  std::uint64_t seed = 1;
  std::string subject;
  bool raw = false;
};

int run_personalize(const PersonalizeArgs& a, bool evaluate_only) {
  const auto dataset = load_prepared(a.data, a.raw);
  const auto bundle = models::load_checkpoint(a.checkpoint);
  if (bundle.ensemble.schema() != dataset.schema)
    throw ConfigError("checkpoint schema does not match the dataset");
  const personalize::QuerySource source{trainer::parse_strategy(bundle.strategy),
                                        bundle.policy ? &*bundle.policy : nullptr};
  personalize::PersonalizeOptions options;
  options.budget = evaluate_only ? 0 : a.budget;
  options.epochs = a.epochs;
  json subjects = json::array();
  bool found = a.subject.empty();
  for (std::size_t s = 0; s < dataset.test.size(); ++s) {
    const auto& session = dataset.test[s];
    if (!a.subject.empty() && session.subject_id != a.subject) continue;
    found = true;
    options.seed = data::derive_seed(a.seed, s);
    subjects.push_back(personalize::personalize_subject(session, bundle.ensemble, source, options).result);
  }
  if (!found) throw ConfigError("no test subject named '" + a.subject + "'");
  const std::string text = json{{"subjects", subjects}}.dump(2) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text(a.out, text);
  return 0;
}

struct ReportArgs {
  fs::path config, rows, out = "mmal_out";
  std::optional<std::size_t> threads;
  bool quiet = false;
};

int run_report(const ReportArgs& a, const CLI::Option* out_flag) {
  if (a.config.empty() == a.rows.empty()) throw ConfigError("report: give exactly one of --config or --rows");
  if (!a.rows.empty()) {
    std::ifstream in(a.rows, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + a.rows.string());
    const auto rows = harness::read_rows_csv(in);
    harness::write_report(output_dir(out_flag, a.out), rows);
    return 0;
  }
  auto config = harness::load_experiment(a.config);
  harness::apply_environment(config);
  if (out_flag->count()) config.output_dir = a.out;
  if (a.threads) config.threads = *a.threads;
  harness::GridOptions options;
  if (!a.quiet)
    options.progress = [](const harness::CellResult& c, std::size_t done, std::size_t total) {
      std::fprintf(stderr, "[%zu/%zu] %s %s B=%zu seed=%zu %s %.1fs\n", done, total, c.strategy.c_str(),
                   c.fusion.c_str(), c.budget, c.seed, c.ok ? "ok" : c.error.c_str(), c.seconds);
    };
  const auto grid = harness::run_grid(config, options);
  harness::write_report(config.output_dir, grid.rows);
  json failures = json::array();
  for (const auto& c : grid.cells)
    if (!c.ok)
      failures.push_back({{"strategy", c.strategy}, {"fusion", c.fusion}, {"budget", c.budget}, {"seed", c.seed},
                          {"error", c.error}});
  write_text(config.output_dir / "failures.json", failures.dump(2) + "\n");
  write_text(config.output_dir / "config.json", harness::to_json(config).dump(2) + "\n");
  std::cout << json{{"rows", grid.rows.size()}, {"cells", grid.cells.size()}, {"failed", failures.size()},
                    {"output", config.output_dir.string()}}
                   .dump()
            << '\n';
  return 0;
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal active learning simulator"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset");
  g->add_option("--config", gen.config, "Generator (or experiment) JSON")->check(CLI::ExistingFile);
  auto* gen_out = g->add_option("--out", gen.out, "Dataset directory");
  g->add_option("--seed", gen.seed);
  g->add_option("--shift", gen.shift, "Subject shift");
  g->add_option("--preset", gen.preset)->check(CLI::IsMember({"desk", "full"}));

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train classifiers and query policy");
  t->add_option("--data", tr.data)->required()->check(CLI::ExistingDirectory);
  t->add_option("--config", tr.config, "Train (or experiment) JSON")->check(CLI::ExistingFile);
  auto* train_out = t->add_option("--out", tr.out, "Checkpoint directory");
  t->add_option("--strategy", tr.strategy, "mmql-cont0, mmql-cont1, unc or rnd");
  t->add_option("--fusion", tr.fusion, "model, feature or a modality name");
  t->add_option("--budget", tr.budget);
  t->add_option("--episodes", tr.episodes);
  t->add_option("--seed", tr.seed);
  t->add_flag("--raw", tr.raw, "Skip z-score normalization");

  PersonalizeArgs pa;
  const auto personalize_flags = [&](CLI::App* sub, bool with_budget) {
    sub->add_option("--data", pa.data)->required()->check(CLI::ExistingDirectory);
    sub->add_option("--checkpoint", pa.checkpoint)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", pa.out, "Result JSON (default stdout)");
    sub->add_option("--seed", pa.seed);
    sub->add_option("--subject", pa.subject, "Only this test subject");
    sub->add_flag("--raw", pa.raw, "Skip z-score normalization");
    if (with_budget) {
      sub->add_option("--budget", pa.budget);
      sub->add_option("--epochs", pa.epochs);
    }
  };
  auto* p = app.add_subcommand("personalize", "Adapt to each test subject under a label budget");
  personalize_flags(p, true);
  auto* e = app.add_subcommand("evaluate", "Score the group model on each test subject");
  personalize_flags(e, false);

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Run an experiment grid, or re-aggregate rows, into report files");
  r->add_option("--config", rp.config, "Experiment JSON")->check(CLI::ExistingFile);
  r->add_option("--rows", rp.rows, "Existing rows.csv")->check(CLI::ExistingFile);
  auto* report_out = r->add_option("--out", rp.out, "Report directory");
  r->add_option("--threads", rp.threads);
  r->add_flag("--quiet", rp.quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    return fail("usage", ex.what(), 2);
  }

  try {
    if (g->parsed()) return run_generate(gen, gen_out);
    if (t->parsed()) return run_train(tr, train_out);
    if (p->parsed()) return run_personalize(pa, false);
    if (e->parsed()) return run_personalize(pa, true);
    if (r->parsed()) return run_report(rp, report_out);
  } catch (const ConfigError& ex) {
    return fail("config", ex.what(), 2);
  } catch (const ContractError& ex) {
    return fail("contract", ex.what(), 3);
  } catch (const std::exception& ex) {
    return fail("internal", ex.what(), 1);
  }
  return 0;
}
