#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genret/corpus.hpp"

namespace genret {

// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string normalize_answer(std::string_view text);

// r / R where R = |provenance| and r counts provenance hits in the top R.
// Throws UndefinedMetric for empty provenance.
double r_precision(std::span<const DocId> retrieved, std::span<const DocId> provenance);
double recall_at_k(std::span<const DocId> retrieved, std::span<const DocId> provenance, std::size_t k);

double exact_match(std::string_view prediction, std::span<const std::string> golds);
double accuracy(std::string_view prediction, std::span<const std::string> golds);
double f1(std::string_view prediction, std::span<const std::string> golds);
// LCS F-measure with beta = 1.
double rouge_l(std::string_view prediction, std::span<const std::string> golds);
double has_answer(std::string_view prediction, std::span<const std::string> golds);

enum class TaskCategory {
  kRetrieval,       // r_precision, recall@1/5/10
  kQa,              // em, f1, has_answer
  kClassification,  // accuracy, has_answer
  kLongForm,        // rouge_l, f1, has_answer
  kDialogue,        // f1, rouge_l, has_answer
};

TaskCategory parse_category(std::string_view name);
std::string_view category_name(TaskCategory category);
std::vector<std::string> category_metrics(TaskCategory category);

struct Prediction {
  std::string query_id;
  std::vector<DocId> docids;
  std::vector<std::string> references;
  std::string answer;
};

// Decoder result records; lines with a "run_config" key are skipped.
std::vector<Prediction> read_predictions(std::istream& in);

struct QueryScores {
  std::string query_id;
  std::map<std::string, double> metrics;
};

struct EvalReport {
  TaskCategory category = TaskCategory::kRetrieval;
  std::map<std::string, double> metrics;  // means over scored queries
  std::vector<QueryScores> per_query;
  std::size_t query_count = 0;
  std::vector<std::string> warnings;
};

// Joins predictions to golds by query id. Throws NotFound naming the first
// prediction without a gold record. Retrieval metrics take the best
// provenance group; queries without provenance (or, for answer metrics,
// without gold answers) are skipped with a warning.
EvalReport evaluate(std::span<const Prediction> predictions, std::span<const GoldRecord> golds,
                    TaskCategory category);
EvalReport evaluate_run(const std::filesystem::path& predictions, const std::filesystem::path& golds,
                        TaskCategory category);

}  // namespace genret
