#include "mmal/harness/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "mmal/data/dataset_io.hpp"
#include "mmal/data/preprocess.hpp"
#include "mmal/errors.hpp"

namespace mmal::harness {

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string log_name(const CellResult& c) {
  std::string name = c.strategy + "_" + c.fusion + "_b" + std::to_string(c.budget) + "_s" + std::to_string(c.seed);
  for (char& ch : name)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') ch = '-';
  return name + ".jsonl";
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, trainer::Strategy strategy, std::size_t budget, std::size_t repeat) {
  std::uint64_t s = data::derive_seed(master, fnv1a(trainer::to_string(strategy)));
  s = data::derive_seed(s, budget);
  return data::derive_seed(s, repeat);
}

data::Dataset experiment_dataset(const ExperimentConfig& config, std::size_t seed_index) {
  data::Dataset dataset;
  if (config.dataset_path) {
    dataset = data::load_dataset(*config.dataset_path);
  } else {
    auto g = config.generator;
    g.seed = data::derive_seed(config.master_seed, 0x6a09e667ULL + seed_index);
    dataset = data::generate(g);
  }
  if (config.normalize) data::zscore_fit_apply(dataset);
  return dataset;
}

std::vector<ReportRow> personalize_rows(const data::Dataset& dataset, const models::ClassifierEnsemble& ensemble,
                                        const personalize::QuerySource& source, std::size_t budget,
                                        std::size_t epochs, std::size_t repeats, std::uint64_t master_seed,
                                        std::size_t seed_index, std::size_t* max_labels) {
  std::vector<ReportRow> rows;
  const std::uint64_t base = data::derive_seed(master_seed, 0xbb67ae85ULL + seed_index);
  for (std::size_t s = 0; s < dataset.test.size(); ++s) {
    const auto& session = dataset.test[s];
    ReportRow row;
    row.strategy = trainer::to_string(source.strategy);
    row.fusion = ensemble.mode().name(dataset.schema);
    row.budget = budget;
    row.seed = seed_index;
    row.subject = session.subject_id;
    for (std::size_t r = 0; r < repeats; ++r) {
      personalize::PersonalizeOptions options;
      options.budget = budget;
      options.epochs = epochs;
      options.seed = data::derive_seed(data::derive_seed(base, s), r);
      const auto outcome = personalize::personalize_subject(session, ensemble, source, options);
      const auto& res = outcome.result;
      if (max_labels) *max_labels = std::max(*max_labels, res.budget_used);
      row.scanned += static_cast<double>(res.scanned);
      row.budget_used += static_cast<double>(res.budget_used);
      if (res.evaluation_empty) continue;
      ++row.repeats;
      row.acc_before += res.before.accuracy;
      row.acc_after += res.after.accuracy;
      row.f1_before += res.before.macro_f1;
      row.f1_after += res.after.macro_f1;
    }
    row.scanned /= static_cast<double>(repeats);
    row.budget_used /= static_cast<double>(repeats);
    if (row.repeats > 0) {
      const double n = static_cast<double>(row.repeats);
      row.acc_before /= n;
      row.acc_after /= n;
      row.f1_before /= n;
      row.f1_after /= n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

GridResult run_grid(const ExperimentConfig& config, const GridOptions& options) {
  config.validate();
  const auto schema = experiment_schema(config);
  const auto fusions = expand_fusions(config.fusions, schema);

  std::vector<data::Dataset> datasets;
  for (std::size_t i = 0; i < config.seeds; ++i) datasets.push_back(experiment_dataset(config, i));

  struct Task {
    trainer::Strategy strategy;
    std::string fusion;
    std::size_t budget;
    std::size_t seed;
  };
  std::vector<Task> tasks;
  for (auto strategy : config.strategies)
    for (const auto& fusion : fusions)
      for (std::size_t budget : config.budgets)
        for (std::size_t seed = 0; seed < config.seeds; ++seed) tasks.push_back({strategy, fusion, budget, seed});

  std::vector<CellResult> cells(tasks.size());
  std::vector<std::vector<ReportRow>> cell_rows(tasks.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;

  const auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const auto& t = tasks[k];
      auto& cell = cells[k];
      cell.strategy = trainer::to_string(t.strategy);
      cell.fusion = t.fusion;
      cell.budget = t.budget;
      cell.seed = t.seed;
      cell.train_seed = cell_seed(config.master_seed, t.strategy, t.budget, t.seed);
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto& dataset = datasets[t.seed];
        auto tc = config.train;
        tc.strategy = t.strategy;
        tc.fusion = models::FusionMode::parse(t.fusion, dataset.schema);
        tc.budget = t.budget;
        tc.seed = cell.train_seed;
        auto trained = trainer::train(dataset, tc);
        double scanned = 0.0;
        for (const auto& log : trained.logs) {
          scanned += static_cast<double>(log.scanned);
          cell.max_train_labels = std::max(cell.max_train_labels, log.labels_acquired);
        }
        if (!trained.logs.empty()) scanned /= static_cast<double>(trained.logs.size());
        const personalize::QuerySource source{t.strategy, trained.policy ? &*trained.policy : nullptr};
        auto rows = personalize_rows(dataset, trained.ensemble, source, t.budget, config.personalization_epochs,
                                     config.personalization_repeats, config.master_seed, t.seed,
                                     &cell.max_personalize_labels);
        for (auto& r : rows) r.train_scanned = scanned;
        cell_rows[k] = std::move(rows);
        cell.logs = std::move(trained.logs);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(progress_mutex);
      ++done;
      if (options.progress) options.progress(cell, done, tasks.size());
    }
  };

  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work);
  }

  GridResult result;
  std::size_t failed = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (!cells[k].ok) {
      ++failed;
      continue;
    }
    if (cells[k].max_train_labels > cells[k].budget || cells[k].max_personalize_labels > cells[k].budget)
      throw ContractError("grid: label budget exceeded in cell " + log_name(cells[k]));
    for (auto& r : cell_rows[k]) result.rows.push_back(std::move(r));
  }
  if (failed == tasks.size()) {
    const std::string first = cells.empty() ? std::string() : cells.front().error;
    throw ConfigError("grid: every cell failed (first error: " + first + ")");
  }

  if (options.write_logs) {
    const auto dir = config.output_dir / "logs";
    std::filesystem::create_directories(dir);
    for (const auto& cell : cells) {
      if (!cell.ok) continue;
      std::ofstream out(dir / log_name(cell), std::ios::binary);
      if (!out) throw ConfigError("grid: cannot write " + (dir / log_name(cell)).string());
      for (const auto& log : cell.logs) out << nlohmann::json(log).dump() << '\n';
    }
  }
  result.cells = std::move(cells);
  return result;
}

}  // namespace mmal::harness
