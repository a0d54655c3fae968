#include "mmal/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "mmal/errors.hpp"

namespace mmal::harness {

using nlohmann::json;

namespace {

const std::vector<std::string> kRowHeader{"strategy",  "fusion",   "budget",   "seed",     "subject",
                                          "acc_before", "acc_after", "f1_before", "f1_after", "scanned",
                                          "budget_used", "train_scanned", "repeats"};

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void write_record(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << "\r\n";
}

double parse_double(const std::string& s, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("rows csv: bad value '") + s + "' in column " + column);
}

std::size_t parse_count(const std::string& s, const char* column) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(std::string("rows csv: bad count '") + s + "' in column " + column);
  return std::stoull(s);
}

struct Sums {
  std::size_t n = 0;
  double acc_before = 0, acc_after = 0, f1_before = 0, f1_after = 0, scanned = 0, used = 0, train_scanned = 0;
  void add(const ReportRow& r) {
    ++n;
    acc_before += r.acc_before;
    acc_after += r.acc_after;
    f1_before += r.f1_before;
    f1_after += r.f1_after;
    scanned += r.scanned;
    used += r.budget_used;
    train_scanned += r.train_scanned;
  }
};

AggregateRow finish(const std::string& strategy, const std::string& fusion, std::optional<std::size_t> budget,
                    const Sums& s) {
  const double n = static_cast<double>(s.n);
  return {strategy,         fusion,          budget,        s.n,          s.acc_before / n, s.acc_after / n,
          s.f1_before / n, s.f1_after / n, s.scanned / n, s.used / n, s.train_scanned / n};
}

/// Groups rows by key while remembering first-appearance order.
template <typename Key>
struct OrderedGroups {
  std::vector<Key> order;
  std::map<Key, Sums> sums;
  void add(const Key& k, const ReportRow& r) {
    auto [it, inserted] = sums.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.add(r);
  }
};

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<ReportRow>& rows) {
  OrderedGroups<std::tuple<std::string, std::string>> overall;
  OrderedGroups<std::tuple<std::string, std::string, std::size_t>> per_budget;
  for (const auto& r : rows) {
    overall.add({r.strategy, r.fusion}, r);
    per_budget.add({r.strategy, r.fusion, r.budget}, r);
  }
  std::vector<AggregateRow> out;
  for (const auto& k : overall.order) out.push_back(finish(std::get<0>(k), std::get<1>(k), std::nullopt, overall.sums[k]));
  for (const auto& k : per_budget.order)
    out.push_back(finish(std::get<0>(k), std::get<1>(k), std::get<2>(k), per_budget.sums[k]));
  return out;
}

void write_rows_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  write_record(out, kRowHeader);
  for (const auto& r : rows) {
    write_record(out, {r.strategy, r.fusion, std::to_string(r.budget), std::to_string(r.seed), r.subject,
                       number(r.acc_before), number(r.acc_after), number(r.f1_before), number(r.f1_after),
                       number(r.scanned), number(r.budget_used), number(r.train_scanned),
                       std::to_string(r.repeats)});
  }
}

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  for (;;) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw ConfigError("csv: unterminated quoted field");
      fields.push_back(std::move(field));
      return true;
    }
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += static_cast<char>(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else {
      field += static_cast<char>(c);
    }
  }
}

std::vector<ReportRow> read_rows_csv(std::istream& in) {
  std::vector<std::string> f;
  if (!read_csv_record(in, f) || f != kRowHeader) throw ConfigError("rows csv: missing or unexpected header");
  std::vector<ReportRow> rows;
  while (read_csv_record(in, f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != kRowHeader.size())
      throw ConfigError("rows csv: record " + std::to_string(rows.size() + 1) + " has " + std::to_string(f.size()) +
                        " fields");
    ReportRow r;
    r.strategy = f[0];
    r.fusion = f[1];
    r.budget = parse_count(f[2], "budget");
    r.seed = parse_count(f[3], "seed");
    r.subject = f[4];
    r.acc_before = parse_double(f[5], "acc_before");
    r.acc_after = parse_double(f[6], "acc_after");
    r.f1_before = parse_double(f[7], "f1_before");
    r.f1_after = parse_double(f[8], "f1_after");
    r.scanned = parse_double(f[9], "scanned");
    r.budget_used = parse_double(f[10], "budget_used");
    r.train_scanned = parse_double(f[11], "train_scanned");
    r.repeats = parse_count(f[12], "repeats");
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  write_record(out, {"strategy", "fusion", "budget", "rows", "acc_before", "acc_after", "f1_before", "f1_after",
                     "scanned", "budget_used", "train_scanned"});
  for (const auto& a : rows) {
    write_record(out, {a.strategy, a.fusion, a.budget ? std::to_string(*a.budget) : std::string("all"),
                       std::to_string(a.rows), number(a.acc_before), number(a.acc_after), number(a.f1_before),
                       number(a.f1_after), number(a.scanned), number(a.budget_used), number(a.train_scanned)});
  }
}

json fig2_series(const std::vector<ReportRow>& rows) {
  json series = json::array();
  for (const auto& a : aggregate(rows)) {
    if (!a.budget) continue;
    series.push_back({{"strategy", a.strategy},
                      {"fusion", a.fusion},
                      {"budget", *a.budget},
                      {"personalize_scanned", a.scanned},
                      {"train_scanned", a.train_scanned},
                      {"budget_used", a.budget_used}});
  }
  return {{"figure", "scanned-samples"}, {"series", series}};
}

json fig3_series(const std::vector<ReportRow>& rows) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, json> curves;
  for (const auto& a : aggregate(rows)) {
    if (!a.budget) continue;
    const std::pair key{a.fusion, a.strategy};
    auto [it, inserted] = curves.try_emplace(key, json{{"fusion", a.fusion},
                                                       {"strategy", a.strategy},
                                                       {"budgets", json::array()},
                                                       {"acc_after", json::array()},
                                                       {"f1_after", json::array()}});
    if (inserted) order.push_back(key);
    it->second["budgets"].push_back(*a.budget);
    it->second["acc_after"].push_back(a.acc_after);
    it->second["f1_after"].push_back(a.f1_after);
  }
  json series = json::array();
  for (const auto& k : order) series.push_back(curves[k]);
  return {{"figure", "budget-vs-metric"}, {"series", series}};
}

json fig4_series(const std::vector<ReportRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<std::string>> subjects;
  std::map<std::pair<Key, std::string>, Sums> sums;
  for (const auto& r : rows) {
    const Key k{r.strategy, r.fusion, r.budget};
    auto& list = subjects[k];
    if (list.empty()) order.push_back(k);
    auto [it, inserted] = sums.try_emplace({k, r.subject});
    if (inserted) list.push_back(r.subject);
    it->second.add(r);
  }
  json series = json::array();
  for (const auto& k : order) {
    json bars = json::array();
    for (const auto& s : subjects[k]) {
      const auto& v = sums[{k, s}];
      const double n = static_cast<double>(v.n);
      bars.push_back({{"subject", s},
                      {"acc_before", v.acc_before / n},
                      {"acc_after", v.acc_after / n},
                      {"f1_before", v.f1_before / n},
                      {"f1_after", v.f1_after / n}});
    }
    series.push_back(
        {{"strategy", std::get<0>(k)}, {"fusion", std::get<1>(k)}, {"budget", std::get<2>(k)}, {"subjects", bars}});
  }
  return {{"figure", "per-subject"}, {"series", series}};
}

void write_report(const std::filesystem::path& dir, const std::vector<ReportRow>& rows) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("report: cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("rows.csv");
    write_rows_csv(out, rows);
  }
  {
    auto out = open("aggregate.csv");
    write_aggregate_csv(out, aggregate(rows));
  }
  open("fig2.json") << fig2_series(rows).dump(2) << '\n';
  open("fig3.json") << fig3_series(rows).dump(2) << '\n';
  open("fig4.json") << fig4_series(rows).dump(2) << '\n';
}

}  // namespace mmal::harness
