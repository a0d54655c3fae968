#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>

#include "mmal/data/window.hpp"

namespace mmal::data {

void to_json(nlohmann::json& j, const DatasetSchema& schema);
void from_json(const nlohmann::json& j, DatasetSchema& schema);

/// Binary subject container:
///   "MMDS" | u32 version | u64 header length | JSON header | payload
/// The header carries subject id, T, modality names/dims, the label map and
/// a per-window index of (index, label, byte offset, double count). The
/// payload holds each window's modalities back to back as row-major
/// little-endian float64.
void write_session(std::ostream& out, const SubjectSession& session, const DatasetSchema& schema);
SubjectSession read_session(std::istream& in, DatasetSchema* schema_out = nullptr);

void save_session(const std::filesystem::path& path, const SubjectSession& session,
                  const DatasetSchema& schema);
SubjectSession load_session(const std::filesystem::path& path, DatasetSchema* schema_out = nullptr);

/// JSON-lines debug form: one window per line.
void write_session_jsonl(std::ostream& out, const SubjectSession& session, const DatasetSchema& schema);
SubjectSession read_session_jsonl(std::istream& in, const DatasetSchema& schema);

/// Directory layout: manifest.json plus one .mmds container per subject.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mmal::data
