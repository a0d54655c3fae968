#include "mmal/data/dataset_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "mmal/errors.hpp"

namespace mmal::data {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'M', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt read_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ConfigError("dataset container: truncated input");
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

nlohmann::json label_json(const std::optional<Label>& label) {
  return label ? nlohmann::json(*label) : nlohmann::json(nullptr);
}

std::optional<Label> parse_label(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  const auto value = j.get<std::size_t>();
  if (value >= kNumClasses) throw ConfigError("dataset: label out of range");
  return value;
}

}  // namespace

void to_json(nlohmann::json& j, const DatasetSchema& schema) {
  j = nlohmann::json{{"steps", schema.steps}, {"modalities", nlohmann::json::array()},
                     {"label_map", schema.label_names}};
  for (const auto& m : schema.modalities) j["modalities"].push_back({{"name", m.name}, {"dim", m.dim}});
}

void from_json(const nlohmann::json& j, DatasetSchema& schema) {
  schema.steps = j.at("steps").get<std::size_t>();
  schema.modalities.clear();
  for (const auto& m : j.at("modalities"))
    schema.modalities.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>()});
  schema.label_names = j.value("label_map", std::vector<std::string>{"low", "medium", "high"});
  if (schema.steps == 0 || schema.modalities.empty())
    throw ConfigError("dataset schema: steps and modalities must be non-empty");
  for (const auto& m : schema.modalities)
    if (m.dim == 0) throw ConfigError("dataset schema: modality " + m.name + " has zero dimension");
}

void write_session(std::ostream& out, const SubjectSession& session, const DatasetSchema& schema) {
  session.validate(schema);
  nlohmann::json header{{"subject_id", session.subject_id}};
  nlohmann::json schema_json = schema;
  header.update(schema_json);
  header["windows"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  const std::uint64_t count = schema.steps * schema.total_dim();
  for (const auto& w : session.windows) {
    header["windows"].push_back(
        {{"index", w.index}, {"label", label_json(w.label)}, {"offset", offset}, {"count", count}});
    offset += count * sizeof(double);
  }
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& w : session.windows)
    for (const auto& m : w.modalities)
      for (double v : m.values()) write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

SubjectSession read_session(std::istream& in, DatasetSchema* schema_out) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("dataset container: bad magic");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion) throw ConfigError("dataset container: unsupported version " + std::to_string(version));
  const auto header_len = read_le<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ConfigError("dataset container: truncated header");
  const auto header = nlohmann::json::parse(text);
  DatasetSchema schema = header.get<DatasetSchema>();

  SubjectSession session;
  session.subject_id = header.at("subject_id").get<std::string>();
  const std::uint64_t expected = schema.steps * schema.total_dim();
  std::uint64_t offset = 0;
  for (const auto& entry : header.at("windows")) {
    if (entry.at("count").get<std::uint64_t>() != expected ||
        entry.at("offset").get<std::uint64_t>() != offset)
      throw ConfigError("dataset container: window index inconsistent with schema");
    MultiModalWindow w;
    w.subject_id = session.subject_id;
    w.index = entry.at("index").get<std::size_t>();
    w.label = parse_label(entry.at("label"));
    for (const auto& spec : schema.modalities) {
      Matrix m(schema.steps, spec.dim);
      for (double& v : m.values()) v = std::bit_cast<double>(read_le<std::uint64_t>(in));
      w.modalities.push_back(std::move(m));
    }
    offset += expected * sizeof(double);
    session.windows.push_back(std::move(w));
  }
  session.validate(schema);
  if (schema_out != nullptr) *schema_out = schema;
  return session;
}

void save_session(const std::filesystem::path& path, const SubjectSession& session,
                  const DatasetSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_session(out, session, schema);
}

SubjectSession load_session(const std::filesystem::path& path, DatasetSchema* schema_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_session(in, schema_out);
}

void write_session_jsonl(std::ostream& out, const SubjectSession& session, const DatasetSchema& schema) {
  session.validate(schema);
  for (const auto& w : session.windows) {
    nlohmann::json line{{"subject_id", w.subject_id}, {"index", w.index}, {"label", label_json(w.label)}};
    nlohmann::json features = nlohmann::json::object();
    for (std::size_t m = 0; m < w.modalities.size(); ++m) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t t = 0; t < w.modalities[m].rows(); ++t) {
        const auto r = w.modalities[m].row_span(t);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      features[schema.modalities[m].name] = std::move(rows);
    }
    line["features"] = std::move(features);
    out << line.dump() << '\n';
  }
}

SubjectSession read_session_jsonl(std::istream& in, const DatasetSchema& schema) {
  SubjectSession session;
  std::string text;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    const auto line = nlohmann::json::parse(text);
    MultiModalWindow w;
    w.subject_id = line.at("subject_id").get<std::string>();
    w.index = line.at("index").get<std::size_t>();
    w.label = parse_label(line.at("label"));
    for (const auto& spec : schema.modalities) {
      const auto rows = line.at("features").at(spec.name).get<std::vector<std::vector<double>>>();
      Matrix m(schema.steps, spec.dim);
      if (rows.size() != schema.steps) throw ConfigError("jsonl: wrong number of steps for " + spec.name);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != spec.dim) throw ConfigError("jsonl: wrong width for " + spec.name);
        std::copy(rows[t].begin(), rows[t].end(), m.data() + t * spec.dim);
      }
      w.modalities.push_back(std::move(m));
    }
    if (session.subject_id.empty()) session.subject_id = w.subject_id;
    session.windows.push_back(std::move(w));
  }
  session.validate(schema);
  return session;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest{{"format", "mmal-dataset"}, {"version", kVersion}, {"schema", dataset.schema},
                          {"train", nlohmann::json::array()}, {"test", nlohmann::json::array()}};
  const auto emit = [&](const std::vector<SubjectSession>& sessions, const char* split) {
    for (const auto& s : sessions) {
      const std::string file = std::string(split) + "_" + s.subject_id + ".mmds";
      save_session(dir / file, s, dataset.schema);
      manifest[split].push_back(file);
    }
  };
  emit(dataset.train, "train");
  emit(dataset.test, "test");
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("missing dataset manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "mmal-dataset")
    throw ConfigError(dir.string() + ": not an mmal dataset");
  Dataset dataset;
  dataset.schema = manifest.at("schema").get<DatasetSchema>();
  for (const char* split : {"train", "test"}) {
    auto& target = std::string(split) == "train" ? dataset.train : dataset.test;
    for (const auto& file : manifest.at(split)) {
      DatasetSchema file_schema;
      target.push_back(load_session(dir / file.get<std::string>(), &file_schema));
      if (!(file_schema == dataset.schema))
        throw ConfigError(file.get<std::string>() + ": schema differs from manifest");
    }
  }
  return dataset;
}

}  // namespace mmal::data
