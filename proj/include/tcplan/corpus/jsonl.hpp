#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tcplan/corpus/types.hpp"

namespace tcplan::corpus {

// Canonical: {id?, user_profile{}, knowledge[[s,r,o]], conversation[{role,
// utterance, goal_index?}], goals[[action, topic]], target?[action, topic]}.
//
// DuRecDial: conversation is an array of utterance strings with parallel
// per-utterance goal_type_list / goal_topic_list; goals are the collapsed
// runs of those annotations. Speakers alternate starting from first_speaker
// ("user" unless given). Profile values may be arrays (joined with "; ").
enum class SchemaMode { Canonical, DuRecDial };

SchemaMode parse_schema_mode(const std::string& name);

struct LoadIssue {
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<DialogueSample> samples;
  std::vector<LoadIssue> issues;
  std::size_t lines_read = 0;
};

// Parses one record. Missing or mistyped fields raise SchemaError, invariant
// violations ValidationError.
DialogueSample parse_record(const std::string& line, SchemaMode mode);

// Collects every malformed line instead of stopping at the first.
LoadResult read_corpus(std::istream& in, SchemaMode mode);

// Strict loader: the first malformed line raises, with its line number.
std::vector<DialogueSample> load_corpus(const std::filesystem::path& path, SchemaMode mode = SchemaMode::Canonical);

// One JSON object per line, fixed key order.
std::string serialize_sample(const DialogueSample& sample);
void write_corpus(const std::filesystem::path& path, const std::vector<DialogueSample>& samples);

struct Splits {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
};

void write_splits(const std::filesystem::path& path, const Splits& splits);
Splits read_splits(const std::filesystem::path& path);

}  // namespace tcplan::corpus
