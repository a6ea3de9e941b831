#include "genret/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "genret/errors.hpp"
#include "json.hpp"

namespace genret {

using json = nlohmann::json;

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

template <typename Fn>
double best_over(std::span<const std::string> golds, Fn&& fn) {
  double best = 0;
  for (const auto& g : golds) best = std::max(best, fn(g));
  return best;
}

double f_measure(double overlap, std::size_t pred_len, std::size_t gold_len) {
  if (pred_len == 0 && gold_len == 0) return 1.0;
  if (pred_len == 0 || gold_len == 0 || overlap == 0) return 0.0;
  double p = overlap / static_cast<double>(pred_len);
  double r = overlap / static_cast<double>(gold_len);
  return 2 * p * r / (p + r);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

void require_provenance(std::span<const DocId> provenance) {
  if (provenance.empty()) throw UndefinedMetric("retrieval metric is undefined for empty provenance");
}

std::size_t hits_in_top(std::span<const DocId> retrieved, std::span<const DocId> provenance, std::size_t k) {
  std::unordered_set<DocId> gold(provenance.begin(), provenance.end());
  std::unordered_set<DocId> counted;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < retrieved.size() && i < k; ++i) {
    if (gold.count(retrieved[i]) && counted.insert(retrieved[i]).second) ++hits;
  }
  return hits;
}

std::size_t distinct_count(std::span<const DocId> ids) {
  return std::unordered_set<DocId>(ids.begin(), ids.end()).size();
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    lowered.push_back(static_cast<char>(std::tolower(u)));
  }
  std::string out;
  for (const auto& w : split_ws(lowered)) {
    if (is_article(w)) continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

double r_precision(std::span<const DocId> retrieved, std::span<const DocId> provenance) {
  require_provenance(provenance);
  auto r = distinct_count(provenance);
  return static_cast<double>(hits_in_top(retrieved, provenance, r)) / static_cast<double>(r);
}

double recall_at_k(std::span<const DocId> retrieved, std::span<const DocId> provenance, std::size_t k) {
  require_provenance(provenance);
  if (k == 0) throw InvalidArgument("recall@k needs k >= 1");
  return static_cast<double>(hits_in_top(retrieved, provenance, k)) / static_cast<double>(distinct_count(provenance));
}

double exact_match(std::string_view prediction, std::span<const std::string> golds) {
  auto p = normalize_answer(prediction);
  return best_over(golds, [&](const std::string& g) { return p == normalize_answer(g) ? 1.0 : 0.0; });
}

double accuracy(std::string_view prediction, std::span<const std::string> golds) {
  return exact_match(prediction, golds);
}

double f1(std::string_view prediction, std::span<const std::string> golds) {
  auto pred = split_ws(normalize_answer(prediction));
  return best_over(golds, [&](const std::string& g) {
    auto gold = split_ws(normalize_answer(g));
    std::unordered_map<std::string, long> counts;
    for (const auto& t : gold) ++counts[t];
    double overlap = 0;
    for (const auto& t : pred) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    return f_measure(overlap, pred.size(), gold.size());
  });
}

double rouge_l(std::string_view prediction, std::span<const std::string> golds) {
  auto pred = split_ws(normalize_answer(prediction));
  return best_over(golds, [&](const std::string& g) {
    auto gold = split_ws(normalize_answer(g));
    return f_measure(static_cast<double>(lcs_length(pred, gold)), pred.size(), gold.size());
  });
}

double has_answer(std::string_view prediction, std::span<const std::string> golds) {
  auto pred = split_ws(normalize_answer(prediction));
  return best_over(golds, [&](const std::string& g) {
    auto gold = split_ws(normalize_answer(g));
    if (gold.empty()) return 0.0;
    return std::search(pred.begin(), pred.end(), gold.begin(), gold.end()) != pred.end() ? 1.0 : 0.0;
  });
}

namespace {

constexpr std::pair<TaskCategory, std::string_view> kCategoryNames[] = {
    {TaskCategory::kRetrieval, "retrieval"},   {TaskCategory::kQa, "qa"},
    {TaskCategory::kClassification, "classification"}, {TaskCategory::kLongForm, "longform"},
    {TaskCategory::kDialogue, "dialogue"},
};

}  // namespace

TaskCategory parse_category(std::string_view name) {
  for (const auto& [c, n] : kCategoryNames) {
    if (n == name) return c;
  }
  throw InvalidArgument("unknown task category '" + std::string(name) + "'");
}

std::string_view category_name(TaskCategory category) {
  for (const auto& [c, n] : kCategoryNames) {
    if (c == category) return n;
  }
  return "unknown";
}

std::vector<std::string> category_metrics(TaskCategory category) {
  switch (category) {
    case TaskCategory::kRetrieval:
      return {"r_precision", "recall@1", "recall@5", "recall@10"};
    case TaskCategory::kQa:
      return {"em", "f1", "has_answer"};
    case TaskCategory::kClassification:
      return {"accuracy", "has_answer"};
    case TaskCategory::kLongForm:
      return {"rouge_l", "f1", "has_answer"};
    case TaskCategory::kDialogue:
      return {"f1", "rouge_l", "has_answer"};
  }
  return {};
}

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      auto rec = json::parse(line);
      if (rec.contains("run_config")) continue;
      Prediction p;
      p.query_id = rec.at("query_id").get<std::string>();
      p.docids = rec.value("docids", std::vector<DocId>{});
      p.references = rec.value("references", std::vector<std::string>{});
      p.answer = rec.value("answer", std::string());
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

EvalReport evaluate(std::span<const Prediction> predictions, std::span<const GoldRecord> golds,
                    TaskCategory category) {
  std::unordered_map<std::string, const GoldRecord*> by_id;
  for (const auto& g : golds) by_id.emplace(g.query_id, &g);

  EvalReport report;
  report.category = category;
  const auto names = category_metrics(category);
  if (predictions.empty()) report.warnings.push_back("prediction file contains no records");

  for (const auto& p : predictions) {
    auto it = by_id.find(p.query_id);
    if (it == by_id.end()) throw NotFound("no gold record for query id '" + p.query_id + "'");
    const auto& gold = *it->second;
    QueryScores q{p.query_id, {}};
    if (category == TaskCategory::kRetrieval) {
      bool any = false;
      for (const auto& group : gold.provenance_groups) {
        if (group.empty()) continue;
        any = true;
        auto best = [&](const std::string& name, double v) { q.metrics[name] = std::max(q.metrics[name], v); };
        best("r_precision", r_precision(p.docids, group));
        best("recall@1", recall_at_k(p.docids, group, 1));
        best("recall@5", recall_at_k(p.docids, group, 5));
        best("recall@10", recall_at_k(p.docids, group, 10));
      }
      if (!any) {
        report.warnings.push_back("query '" + p.query_id + "' has no provenance; skipped");
        continue;
      }
    } else {
      if (gold.answers.empty()) {
        report.warnings.push_back("query '" + p.query_id + "' has no gold answers; skipped");
        continue;
      }
      for (const auto& name : names) {
        double v = 0;
        if (name == "em") v = exact_match(p.answer, gold.answers);
        else if (name == "accuracy") v = accuracy(p.answer, gold.answers);
        else if (name == "f1") v = f1(p.answer, gold.answers);
        else if (name == "rouge_l") v = rouge_l(p.answer, gold.answers);
        else if (name == "has_answer") v = has_answer(p.answer, gold.answers);
        q.metrics[name] = v;
      }
    }
    report.per_query.push_back(std::move(q));
  }

  report.query_count = report.per_query.size();
  for (const auto& name : names) {
    double sum = 0;
    for (const auto& q : report.per_query) sum += q.metrics.at(name);
    report.metrics[name] = report.query_count ? sum / static_cast<double>(report.query_count) : 0.0;
  }
  return report;
}

EvalReport evaluate_run(const std::filesystem::path& predictions, const std::filesystem::path& golds,
                        TaskCategory category) {
  std::ifstream in(predictions);
  if (!in) throw NotFound("cannot open predictions file " + predictions.string());
  auto preds = read_predictions(in);
  auto gold = load_gold(golds);
  return evaluate(preds, gold, category);
}

}  // namespace genret
