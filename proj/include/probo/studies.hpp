#pragma once

// Study descriptors (inputs + declared reproducibility boundaries), standardized
// output tables, and the output commitment a proponent registers before any
// verifier sees the request.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/hash.hpp"
#include "probo/types.hpp"

namespace probo {

struct ArtifactRef {
  std::string uri;
  std::string content_hash;  // kept raw so a missing/malformed hash can be reported
  std::string label;

  friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

struct Software {
  std::string name;
  std::string version;
  std::string parameters;

  friend bool operator==(const Software&, const Software&) = default;
};

struct DataSection {
  std::vector<ArtifactRef> artifacts;
  std::vector<std::string> notes;  // device names/versions, raw formats

  friend bool operator==(const DataSection&, const DataSection&) = default;
};

struct PreprocessingSection {
  std::vector<ArtifactRef> artifacts;
  std::vector<Software> software;

  friend bool operator==(const PreprocessingSection&, const PreprocessingSection&) = default;
};

struct AnalysisSection {
  std::vector<Software> software;
  std::string protocol;
  std::string hardware;

  friend bool operator==(const AnalysisSection&, const AnalysisSection&) = default;
};

// Acceptable interval for one metric, optionally with a top-k overlap rule on
// the ranked feature list.
struct ToleranceSpec {
  std::string metric;
  double low = 0.0;
  double high = 0.0;
  std::optional<std::int64_t> list_k;
  std::optional<double> min_overlap;

  friend bool operator==(const ToleranceSpec&, const ToleranceSpec&) = default;
};

struct OutputTable {
  std::map<std::string, double> metrics;
  std::vector<std::string> ranked_features;

  friend bool operator==(const OutputTable&, const OutputTable&) = default;
};

struct StudyDescriptor {
  std::string request_id;
  std::string proponent;
  std::string title;
  std::string topic;
  DataSection data_metadata;
  PreprocessingSection preprocessing;
  AnalysisSection analysis;
  std::vector<ToleranceSpec> tolerances;
  std::int64_t etv_hours = 0;
  std::optional<Timestamp> deadline;  // fixed at submission

  friend bool operator==(const StudyDescriptor&, const StudyDescriptor&) = default;
};

struct Commitment {
  std::string request_id;
  HashDigest output_hash;

  friend bool operator==(const Commitment&, const Commitment&) = default;
};

// ---------------------------------------------------------------------------
// JSON mapping. Reading is lenient about missing optional strings so that
// validate_descriptor can report them; structural type errors still throw.

inline void to_json(Json& j, const ArtifactRef& a) {
  j = Json{{"uri", a.uri}, {"content_hash", a.content_hash}, {"label", a.label}};
}
inline void from_json(const Json& j, ArtifactRef& a) {
  a.uri = j.value("uri", std::string{});
  a.content_hash = j.value("content_hash", std::string{});
  a.label = j.value("label", std::string{});
}

inline void to_json(Json& j, const Software& s) {
  j = Json{{"name", s.name}, {"version", s.version}, {"parameters", s.parameters}};
}
inline void from_json(const Json& j, Software& s) {
  s.name = j.value("name", std::string{});
  s.version = j.value("version", std::string{});
  s.parameters = j.value("parameters", std::string{});
}

inline void to_json(Json& j, const DataSection& d) {
  j = Json{{"artifacts", d.artifacts}, {"notes", d.notes}};
}
inline void from_json(const Json& j, DataSection& d) {
  d.artifacts = j.value("artifacts", std::vector<ArtifactRef>{});
  d.notes = j.value("notes", std::vector<std::string>{});
}

inline void to_json(Json& j, const PreprocessingSection& p) {
  j = Json{{"artifacts", p.artifacts}, {"software", p.software}};
}
inline void from_json(const Json& j, PreprocessingSection& p) {
  p.artifacts = j.value("artifacts", std::vector<ArtifactRef>{});
  p.software = j.value("software", std::vector<Software>{});
}

inline void to_json(Json& j, const AnalysisSection& a) {
  j = Json{{"software", a.software}, {"protocol", a.protocol}, {"hardware", a.hardware}};
}
inline void from_json(const Json& j, AnalysisSection& a) {
  a.software = j.value("software", std::vector<Software>{});
  a.protocol = j.value("protocol", std::string{});
  a.hardware = j.value("hardware", std::string{});
}

inline void to_json(Json& j, const ToleranceSpec& t) {
  j = Json{{"metric", t.metric}, {"low", t.low}, {"high", t.high}};
  if (t.list_k) j["list_k"] = *t.list_k;
  if (t.min_overlap) j["min_overlap"] = *t.min_overlap;
}
inline void from_json(const Json& j, ToleranceSpec& t) {
  t.metric = j.value("metric", std::string{});
  t.low = j.at("low").get<double>();
  t.high = j.at("high").get<double>();
  t.list_k = j.contains("list_k") ? std::optional(j.at("list_k").get<std::int64_t>()) : std::nullopt;
  t.min_overlap =
      j.contains("min_overlap") ? std::optional(j.at("min_overlap").get<double>()) : std::nullopt;
}

inline void to_json(Json& j, const OutputTable& t) {
  Json metrics = Json::object();
  for (const auto& [name, value] : t.metrics) metrics[name] = value;
  j = Json{{"metrics", std::move(metrics)}, {"ranked_features", t.ranked_features}};
}
inline void from_json(const Json& j, OutputTable& t) {
  t.metrics.clear();
  for (const auto& [name, value] : j.at("metrics").items()) t.metrics[name] = value.get<double>();
  t.ranked_features = j.value("ranked_features", std::vector<std::string>{});
}

inline void to_json(Json& j, const StudyDescriptor& d) {
  j = Json{{"request_id", d.request_id},
           {"proponent", d.proponent},
           {"title", d.title},
           {"topic", d.topic},
           {"data_metadata", d.data_metadata},
           {"preprocessing", d.preprocessing},
           {"analysis", d.analysis},
           {"tolerances", d.tolerances},
           {"etv_hours", d.etv_hours}};
  if (d.deadline) j["deadline"] = *d.deadline;
}
inline void from_json(const Json& j, StudyDescriptor& d) {
  d.request_id = j.value("request_id", std::string{});
  d.proponent = j.value("proponent", std::string{});
  d.title = j.value("title", std::string{});
  d.topic = j.value("topic", std::string{});
  d.data_metadata = j.value("data_metadata", DataSection{});
  d.preprocessing = j.value("preprocessing", PreprocessingSection{});
  d.analysis = j.value("analysis", AnalysisSection{});
  d.tolerances = j.value("tolerances", std::vector<ToleranceSpec>{});
  d.etv_hours = j.value("etv_hours", std::int64_t{0});
  d.deadline = j.contains("deadline") ? std::optional(j.at("deadline").get<Timestamp>()) : std::nullopt;
}

inline void to_json(Json& j, const Commitment& c) {
  j = Json{{"request_id", c.request_id}, {"output_hash", c.output_hash.hex()}};
}
inline void from_json(const Json& j, Commitment& c) {
  c.request_id = j.at("request_id").get<std::string>();
  c.output_hash = HashDigest::from_hex(j.at("output_hash").get<std::string>());
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string section;
  std::string rule;

  std::string str() const { return section + ": " + rule; }
  friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

inline void check_artifacts(const std::vector<ArtifactRef>& refs, const std::string& section,
                            std::vector<Violation>& out) {
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string where = section + "[" + std::to_string(i) + "]";
    const auto& ref = refs[i];
    if (ref.uri.empty()) out.push_back({where, "missing uri"});
    if (ref.content_hash.empty()) {
      out.push_back({where, "missing content hash"});
    } else if (!HashDigest::well_formed(ref.content_hash)) {
      out.push_back({where, "malformed content hash"});
    }
    if (ref.label.empty()) out.push_back({where, "missing label"});
  }
}

inline void check_software(const std::vector<Software>& list, const std::string& section,
                           std::vector<Violation>& out) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = section + "[" + std::to_string(i) + "]";
    if (list[i].name.empty()) out.push_back({where, "missing software name"});
    if (list[i].version.empty()) {
      out.push_back({where, "software '" + list[i].name + "' without version"});
    }
  }
}

}  // namespace detail

// Returns every rule the descriptor breaks; an empty list means OK. Never throws
// on content problems.
inline std::vector<Violation> validate_descriptor(const StudyDescriptor& d,
                                                  std::int64_t horizon_hours) {
  std::vector<Violation> out;
  if (d.request_id.empty()) out.push_back({"request_id", "empty request id"});
  if (d.proponent.empty()) out.push_back({"proponent", "empty proponent id"});
  if (d.topic.empty()) out.push_back({"topic", "empty topic tag"});

  if (d.data_metadata.artifacts.empty()) out.push_back({"data_metadata", "empty data section"});
  detail::check_artifacts(d.data_metadata.artifacts, "data_metadata", out);
  detail::check_artifacts(d.preprocessing.artifacts, "preprocessing.artifacts", out);
  detail::check_software(d.preprocessing.software, "preprocessing.software", out);
  detail::check_software(d.analysis.software, "analysis.software", out);

  if (d.tolerances.empty()) out.push_back({"tolerances", "empty tolerance list"});
  for (std::size_t i = 0; i < d.tolerances.size(); ++i) {
    const auto& t = d.tolerances[i];
    const std::string where = "tolerances[" + std::to_string(i) + "]";
    if (t.metric.empty()) out.push_back({where, "missing metric name"});
    if (!std::isfinite(t.low) || !std::isfinite(t.high)) {
      out.push_back({where, "non-finite bound"});
    } else if (t.low > t.high) {
      out.push_back({where, "low exceeds high"});
    }
    if (t.list_k) {
      if (*t.list_k < 1) out.push_back({where, "list_k must be positive"});
      if (!t.min_overlap) out.push_back({where, "list_k without min_overlap"});
    }
    if (t.min_overlap && !(*t.min_overlap >= 0.0 && *t.min_overlap <= 1.0)) {
      out.push_back({where, "min_overlap outside [0,1]"});
    }
  }

  if (d.etv_hours < 1) {
    out.push_back({"etv_hours", "etv must be positive"});
  } else if (d.etv_hours > horizon_hours) {
    out.push_back({"etv_hours", "etv exceeds network time horizon"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commitment

inline HashDigest commit_outputs(const OutputTable& table) {
  return canonical_digest(Json(table));
}

inline Commitment make_commitment(const StudyDescriptor& d, const OutputTable& table) {
  return Commitment{d.request_id, commit_outputs(table)};
}

// ---------------------------------------------------------------------------
// Pipeline decomposition: a multi-phase study is broadcast one phase at a
// time, each phase chained to the previous one's outputs.

enum class Section { DataMetadata, Preprocessing, Analysis };

inline const char* section_label(Section s) {
  switch (s) {
    case Section::DataMetadata: return "data_metadata";
    case Section::Preprocessing: return "preprocessing";
    case Section::Analysis: return "analysis";
  }
  return "";
}

inline Section parse_section(const std::string& label) {
  if (label == "data_metadata") return Section::DataMetadata;
  if (label == "preprocessing") return Section::Preprocessing;
  if (label == "analysis") return Section::Analysis;
  fail(ErrorKind::InvalidPartition, "unknown section label '" + label + "'");
}

inline std::string stage_request_id(const std::string& base, std::size_t index) {
  return base + "." + std::to_string(index);
}

// Each stage lists the sections it carries. Stages must cover all three
// sections exactly once, in pipeline order. Stage i+1 receives an artifact
// reference to stage i's outputs whose content hash binds the exact upstream
// stage descriptor.
inline std::vector<StudyDescriptor> decompose_pipeline(const StudyDescriptor& d,
                                                       const std::vector<std::vector<Section>>& stages) {
  const std::vector<Section> order = {Section::DataMetadata, Section::Preprocessing, Section::Analysis};
  std::vector<Section> flat;
  for (const auto& stage : stages) {
    if (stage.empty()) fail(ErrorKind::InvalidPartition, "empty stage");
    flat.insert(flat.end(), stage.begin(), stage.end());
  }
  if (flat != order) {
    fail(ErrorKind::InvalidPartition,
         "stages must cover data_metadata, preprocessing, analysis exactly once and in order");
  }

  std::vector<StudyDescriptor> out;
  out.reserve(stages.size());
  for (std::size_t i = 0; i < stages.size(); ++i) {
    StudyDescriptor s = d;
    s.request_id = stage_request_id(d.request_id, i);
    s.data_metadata = {};
    s.preprocessing = {};
    s.analysis = {};
    for (Section sec : stages[i]) {
      switch (sec) {
        case Section::DataMetadata: s.data_metadata = d.data_metadata; break;
        case Section::Preprocessing: s.preprocessing = d.preprocessing; break;
        case Section::Analysis: s.analysis = d.analysis; break;
      }
    }
    if (i > 0) {
      const StudyDescriptor& prev = out.back();
      ArtifactRef upstream{"probo:" + prev.request_id + "/outputs",
                           canonical_digest(Json(prev)).hex(), "upstream:" + prev.request_id};
      s.data_metadata.artifacts.insert(s.data_metadata.artifacts.begin(), std::move(upstream));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace probo
