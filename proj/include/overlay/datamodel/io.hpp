#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "overlay/datamodel/types.hpp"

namespace overlay::data {

struct Issue {
  std::size_t line = 0;  // 1-based input line
  std::string field;     // empty when the whole line is at fault
  std::string message;
  bool warning = false;  // warnings never fail a parse
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& message);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Strict ingestion of line-delimited records: throws ParseError at the first
// invariant violation, naming the line and field. Warnings (unknown fields,
// attributes outside the reference list) go to `issues` when provided.
std::vector<BenchmarkSample> parse_samples(std::istream& in,
                                           std::vector<Issue>* issues = nullptr);
std::vector<EvaluationRecord> parse_records(std::istream& in,
                                            std::vector<Issue>* issues = nullptr);

// Lenient ingestion: records one issue per bad line and keeps going.
std::vector<BenchmarkSample> parse_samples_lenient(std::istream& in,
                                                   std::vector<Issue>& issues);
std::vector<EvaluationRecord> parse_records_lenient(std::istream& in,
                                                    std::vector<Issue>& issues);

// One object per line, schema_version stamped, fixed field order. Byte-stable
// across runs, and parse(serialize(x)) == x field-exact.
std::string serialize_samples(const std::vector<BenchmarkSample>& samples);
std::string serialize_records(const std::vector<EvaluationRecord>& records);

}  // namespace overlay::data
