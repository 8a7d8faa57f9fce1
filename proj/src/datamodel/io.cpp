#include "overlay/datamodel/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <utility>

#include "json.hpp"
#include "overlay/datamodel/attributes.hpp"

namespace overlay::data {

namespace {

using json = nlohmann::ordered_json;

constexpr double kAllocationSumTol = 1e-9;
constexpr double kProbSumTol = 1e-6;

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& field,
                       const std::string& message) {
  throw ParseError(line, field, message);
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

// Absent and explicit null are treated the same for optional fields.
const json* find_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string require_string(const json& j, std::size_t line, const char* key) {
  const json* f = find_field(j, key);
  if (f == nullptr) fail(line, key, "required field is missing");
  if (!f->is_string()) fail(line, key, "must be a string");
  return f->get<std::string>();
}

std::string require_nonempty_string(const json& j, std::size_t line,
                                    const char* key) {
  std::string v = require_string(j, line, key);
  if (v.empty()) fail(line, key, "must be non-empty");
  return v;
}

int require_int(const json& j, std::size_t line, const char* key, int lo,
                int hi) {
  const json* f = find_field(j, key);
  if (f == nullptr) fail(line, key, "required field is missing");
  if (!f->is_number_integer()) fail(line, key, "must be an integer");
  const auto v = f->get<std::int64_t>();
  if (v < lo || v > hi) {
    fail(line, key,
         "must be in [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

void require_schema_version(const json& j, std::size_t line) {
  const std::string v = require_string(j, line, "schema_version");
  if (v != kSchemaVersion) {
    fail(line, "schema_version",
         "unsupported schema version '" + v + "' (expected '" +
             std::string(kSchemaVersion) + "')");
  }
}

std::string require_option_label(const json& j, std::size_t line,
                                 const char* key) {
  const std::string v = require_string(j, line, key);
  if (!is_option_label(v)) fail(line, key, "must be an option label A..D");
  return v;
}

void warn_unknown_fields(const json& j, std::size_t line,
                         const std::vector<std::string_view>& known,
                         std::vector<Issue>* issues) {
  if (issues == nullptr) return;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      issues->push_back({line, key, "unknown field ignored", true});
    }
  }
}

BenchmarkSample parse_sample_object(const json& j, std::size_t line,
                                    std::vector<Issue>* issues) {
  if (!j.is_object()) fail(line, "", "record must be an object");
  require_schema_version(j, line);

  BenchmarkSample s;
  s.sample_id = require_nonempty_string(j, line, "sample_id");
  s.group_id = require_nonempty_string(j, line, "group_id");

  const std::string dim = require_nonempty_string(j, line, "dimension");
  const auto parsed_dim = dimension_from_string(dim);
  if (!parsed_dim) fail(line, "dimension", "unknown dimension '" + dim + "'");
  s.dimension = *parsed_dim;

  s.attribute = require_nonempty_string(j, line, "attribute");
  if (issues != nullptr && !is_reference_attribute(s.attribute)) {
    issues->push_back(
        {line, "attribute",
         "'" + s.attribute + "' is not in the reference taxonomy", true});
  }

  s.tier = require_int(j, line, "tier", 1, 3);

  const std::string cond = require_nonempty_string(j, line, "condition");
  const auto parsed_cond = condition_from_string(cond);
  if (!parsed_cond) fail(line, "condition", "unknown condition '" + cond + "'");
  s.condition = *parsed_cond;

  const json* options = find_field(j, "options");
  if (options == nullptr) fail(line, "options", "required field is missing");
  if (!options->is_object() || options->size() != kOptionCount) {
    fail(line, "options", "must be an object with exactly the keys A..D");
  }
  for (std::size_t i = 0; i < kOptionCount; ++i) {
    const std::string label = option_label(i);
    const auto it = options->find(label);
    if (it == options->end()) fail(line, "options", "missing option " + label);
    if (!it->is_string()) fail(line, "options", "option " + label + " must be a string");
    s.options[i] = it->get<std::string>();
  }

  s.ground_truth = require_option_label(j, line, "ground_truth");

  const bool contradictory = s.condition == Condition::TextContradictory;
  if (const json* f = find_field(j, "hallucination_option"); f != nullptr) {
    if (!contradictory) {
      fail(line, "hallucination_option",
           "only allowed when condition is text_contradictory");
    }
    s.hallucination_option = require_option_label(j, line, "hallucination_option");
    if (*s.hallucination_option == s.ground_truth) {
      fail(line, "hallucination_option", "must differ from ground_truth");
    }
  } else if (contradictory) {
    fail(line, "hallucination_option",
         "required when condition is text_contradictory");
  }

  if (find_field(j, "scs") != nullptr) {
    if (!contradictory) {
      fail(line, "scs", "only allowed when condition is text_contradictory");
    }
    s.scs = require_int(j, line, "scs", 1, 5);
  } else if (contradictory) {
    fail(line, "scs", "required when condition is text_contradictory");
  }

  const json* alloc = find_field(j, "allocation");
  if (alloc == nullptr) fail(line, "allocation", "required field is missing");
  if (!alloc->is_array() || alloc->size() != kDimensionCount) {
    fail(line, "allocation", "must be an array of 4 numbers (T, A, O, S)");
  }
  std::array<double, kDimensionCount> raw{};
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    const json& e = (*alloc)[i];
    if (!e.is_number()) fail(line, "allocation", "entries must be numbers");
    raw[i] = e.get<double>();
  }
  try {
    set_allocation(s, raw);
  } catch (const std::invalid_argument& e) {
    fail(line, "allocation", e.what());
  }

  warn_unknown_fields(j, line,
                      {"schema_version", "sample_id", "group_id", "dimension",
                       "attribute", "tier", "condition", "options",
                       "ground_truth", "hallucination_option", "scs",
                       "allocation"},
                      issues);
  return s;
}

EvaluationRecord parse_record_object(const json& j, std::size_t line,
                                     std::vector<Issue>* issues) {
  if (!j.is_object()) fail(line, "", "record must be an object");
  require_schema_version(j, line);

  EvaluationRecord r;
  r.sample_id = require_nonempty_string(j, line, "sample_id");
  r.model_id = require_nonempty_string(j, line, "model_id");
  r.prediction = require_option_label(j, line, "prediction");

  if (const json* f = find_field(j, "option_probs"); f != nullptr) {
    if (!f->is_array() || f->size() != kOptionCount) {
      fail(line, "option_probs", "must be an array of 4 numbers (A..D)");
    }
    std::array<double, kOptionCount> probs{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kOptionCount; ++i) {
      const json& e = (*f)[i];
      if (!e.is_number()) fail(line, "option_probs", "entries must be numbers");
      probs[i] = e.get<double>();
      if (!(probs[i] >= 0.0)) {
        fail(line, "option_probs", "entries must be nonnegative");
      }
      sum += probs[i];
    }
    if (std::abs(sum - 1.0) > kProbSumTol) {
      fail(line, "option_probs", "must sum to 1 within 1e-6");
    }
    r.option_probs = probs;
  }

  warn_unknown_fields(
      j, line,
      {"schema_version", "sample_id", "model_id", "prediction", "option_probs"},
      issues);
  return r;
}

json parse_line(const std::string& line, std::size_t lineno) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(lineno, "", "malformed record");
  return j;
}

template <typename T, typename ParseFn>
std::vector<T> parse_stream(std::istream& in, std::vector<Issue>* issues,
                            bool lenient, ParseFn parse_fn) {
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    if (!lenient) {
      out.push_back(parse_fn(parse_line(line, lineno), lineno, issues));
      continue;
    }
    try {
      out.push_back(parse_fn(parse_line(line, lineno), lineno, issues));
    } catch (const ParseError& e) {
      issues->push_back({e.line(), e.field(), e.what(), false});
    }
  }
  return out;
}

json sample_to_json(const BenchmarkSample& s) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["sample_id"] = s.sample_id;
  j["group_id"] = s.group_id;
  j["dimension"] = to_string(s.dimension);
  j["attribute"] = s.attribute;
  j["tier"] = s.tier;
  j["condition"] = to_string(s.condition);
  json options;
  for (std::size_t i = 0; i < kOptionCount; ++i) {
    options[option_label(i)] = s.options[i];
  }
  j["options"] = std::move(options);
  j["ground_truth"] = s.ground_truth;
  if (s.hallucination_option) j["hallucination_option"] = *s.hallucination_option;
  if (s.scs) j["scs"] = *s.scs;
  j["allocation"] = s.allocation_raw;
  return j;
}

json record_to_json(const EvaluationRecord& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["sample_id"] = r.sample_id;
  j["model_id"] = r.model_id;
  j["prediction"] = r.prediction;
  if (r.option_probs) j["option_probs"] = *r.option_probs;
  return j;
}

}  // namespace

ParseError::ParseError(std::size_t line, std::string field,
                       const std::string& message)
    : std::runtime_error("line " + std::to_string(line) +
                         (field.empty() ? "" : ", field '" + field + "'") +
                         ": " + message),
      line_(line),
      field_(std::move(field)) {}

const char* to_string(Dimension d) {
  switch (d) {
    case Dimension::Temporal: return "temporal";
    case Dimension::Action: return "action";
    case Dimension::Object: return "object";
    case Dimension::Spatial: return "spatial";
  }
  return "?";
}

const char* to_string(Condition c) {
  switch (c) {
    case Condition::TextFree: return "text_free";
    case Condition::TextCongruent: return "text_congruent";
    case Condition::TextContradictory: return "text_contradictory";
  }
  return "?";
}

std::optional<Dimension> dimension_from_string(std::string_view s) {
  if (s == "temporal") return Dimension::Temporal;
  if (s == "action") return Dimension::Action;
  if (s == "object") return Dimension::Object;
  if (s == "spatial") return Dimension::Spatial;
  return std::nullopt;
}

std::optional<Condition> condition_from_string(std::string_view s) {
  if (s == "text_free") return Condition::TextFree;
  if (s == "text_congruent") return Condition::TextCongruent;
  if (s == "text_contradictory") return Condition::TextContradictory;
  return std::nullopt;
}

bool is_option_label(std::string_view s) {
  return s.size() == 1 && s[0] >= 'A' && s[0] <= 'D';
}

std::size_t option_index(std::string_view label) {
  if (!is_option_label(label)) {
    throw std::invalid_argument("option label must be A..D");
  }
  return static_cast<std::size_t>(label[0] - 'A');
}

std::string option_label(std::size_t index) {
  if (index >= kOptionCount) {
    throw std::invalid_argument("option index must be < 4");
  }
  return std::string(1, static_cast<char>('A' + index));
}

void set_allocation(BenchmarkSample& sample,
                    const std::array<double, kDimensionCount>& raw) {
  double sum = 0.0;
  for (const double v : raw) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("entries must be finite and nonnegative");
    }
    sum += v;
  }
  if (sum <= 0.0) throw std::invalid_argument("entries must not all be zero");
  if (sum > 1.0 + kAllocationSumTol) {
    throw std::invalid_argument("entries must sum to at most 1");
  }
  sample.allocation_raw = raw;
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    sample.allocation[i] = raw[i] / sum;
  }
}

bool is_reference_attribute(std::string_view attribute) {
  const std::string needle = lowercase(attribute);
  return std::find(kAttributeReference.begin(), kAttributeReference.end(),
                   needle) != kAttributeReference.end();
}

std::vector<BenchmarkSample> parse_samples(std::istream& in,
                                           std::vector<Issue>* issues) {
  return parse_stream<BenchmarkSample>(in, issues, false, parse_sample_object);
}

std::vector<EvaluationRecord> parse_records(std::istream& in,
                                            std::vector<Issue>* issues) {
  return parse_stream<EvaluationRecord>(in, issues, false, parse_record_object);
}

std::vector<BenchmarkSample> parse_samples_lenient(std::istream& in,
                                                   std::vector<Issue>& issues) {
  return parse_stream<BenchmarkSample>(in, &issues, true, parse_sample_object);
}

std::vector<EvaluationRecord> parse_records_lenient(std::istream& in,
                                                    std::vector<Issue>& issues) {
  return parse_stream<EvaluationRecord>(in, &issues, true, parse_record_object);
}

std::string serialize_samples(const std::vector<BenchmarkSample>& samples) {
  std::string out;
  for (const BenchmarkSample& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::string serialize_records(const std::vector<EvaluationRecord>& records) {
  std::string out;
  for (const EvaluationRecord& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace overlay::data
