#include "genret/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "genret/decoder.hpp"
#include "genret/errors.hpp"
#include "genret/prompts.hpp"
#include "genret/tokenizer.hpp"
#include "json.hpp"

namespace genret {

namespace detail {
extern const char kStopwordsV1[];
}

using json = nlohmann::json;

namespace {

constexpr std::pair<Task, std::string_view> kTaskNames[] = {
    {Task::kRetrieval, "retrieval"},
    {Task::kClosedBook, "closed_book"},
    {Task::kRagReference, "rag_reference"},
    {Task::kRagAnswer, "rag_answer"},
    {Task::kAuxQuery2DocIds, "aux_query2docids"},
    {Task::kAuxSummary2DocIds, "aux_summary2docids"},
    {Task::kAuxDocId2Summary, "aux_docid2summary"},
    {Task::kAuxDocId2Related, "aux_docid2related"},
};

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

std::string_view task_name(Task task) {
  for (const auto& [t, name] : kTaskNames) {
    if (t == task) return name;
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  for (const auto& [t, n] : kTaskNames) {
    if (n == name) return t;
  }
  throw InvalidArgument("unknown task '" + std::string(name) + "'");
}

bool is_aux(Task task) {
  return task == Task::kAuxQuery2DocIds || task == Task::kAuxSummary2DocIds || task == Task::kAuxDocId2Summary ||
         task == Task::kAuxDocId2Related;
}

void write_examples(std::ostream& out, std::span<const TrainingExample> examples) {
  for (const auto& e : examples) {
    json rec;
    rec["task"] = task_name(e.task);
    rec["input"] = e.input;
    rec["target"] = e.target;
    rec["noise_flag"] = e.noise_flag;
    out << rec.dump() << '\n';
  }
}

std::vector<TrainingExample> read_examples(std::istream& in) {
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      auto rec = json::parse(line);
      if (rec.contains("run_config")) continue;
      TrainingExample e;
      e.task = parse_task(rec.at("task").get<std::string>());
      e.input = rec.at("input").get<std::string>();
      e.target = rec.at("target").get<std::string>();
      e.noise_flag = rec.value("noise_flag", false);
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::vector<DocId> OverlapReranker::rerank(std::string_view query, std::span<const DocId> candidates) const {
  auto q = index_terms(query);
  std::set<std::string> terms(q.begin(), q.end());
  std::vector<std::pair<std::size_t, DocId>> scored;
  scored.reserve(candidates.size());
  for (const auto& id : candidates) {
    auto d = corpus_->get(id);
    std::unordered_set<std::string> present;
    for (const auto* field : {&d.title, &d.section, &d.body}) {
      for (auto& t : index_terms(*field)) present.insert(std::move(t));
    }
    std::size_t overlap = 0;
    for (const auto& t : terms) overlap += present.count(t);
    scored.emplace_back(overlap, id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<DocId> out;
  out.reserve(scored.size());
  for (auto& [s, id] : scored) out.push_back(std::move(id));
  return out;
}

std::vector<DocId> merge_ranked(std::span<const DocId> labeled, std::span<const DocId> reranked, std::size_t k) {
  std::vector<DocId> out;
  std::unordered_set<DocId> seen;
  for (const auto* list : {&labeled, &reranked}) {
    for (const auto& id : *list) {
      if (out.size() == k) return out;
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

std::vector<DocId> construct_ranked_docid_list(std::string_view query, std::span<const DocId> labeled,
                                               const Bm25Index& index, const Reranker& reranker, std::size_t k,
                                               std::size_t candidates) {
  for (const auto& id : labeled) {
    if (!index.doc_index(id)) throw NotFound("labeled DocId '" + id + "' is not in the corpus");
  }
  std::vector<DocId> pool;
  if (labeled.size() < k) {
    for (auto& [id, score] : index.retrieve(query, candidates)) pool.push_back(std::move(id));
    pool = reranker.rerank(query, pool);
  }
  return merge_ranked(labeled, pool, k);
}

TrainingExample make_retrieval_example(std::string_view query, std::span<const DocId> docids) {
  return {Task::kRetrieval, with_prefix(kRetrievePrefix, query), render_docid_list(docids), false};
}

TrainingExample make_closed_book_example(std::string_view query, std::string_view answer) {
  return {Task::kClosedBook, with_prefix(kAnswerPrefix, query), render_answer(answer), false};
}

std::vector<TrainingExample> make_rag_examples(std::string_view query, std::span<const Document> context_docs,
                                               std::string_view gold_reference, std::string_view gold_answer,
                                               double tau, Rng& rng, std::size_t document_budget) {
  if (!(tau >= 0 && tau <= 1)) throw InvalidArgument("noise probability must lie in [0, 1]");
  std::vector<const std::string*> sentences;
  for (const auto& d : context_docs) {
    for (const auto& s : d.sentences) sentences.push_back(&s);
  }
  if (tau > 0 && sentences.empty()) {
    throw InvalidArgument("noise sampling needs at least one sentence in the context documents");
  }
  auto prompt = render_rag_input(query, context_docs, document_budget);

  TrainingExample ref{Task::kRagReference, prompt, render_reference(gold_reference), false};

  std::string reference(gold_reference);
  bool noisy = tau > 0 && bernoulli(rng, tau);
  if (noisy) reference = *sentences[uniform_index(rng, sentences.size())];
  TrainingExample ans{Task::kRagAnswer, prompt + " " + render_reference(reference), render_answer(gold_answer),
                      noisy};
  return {std::move(ref), std::move(ans)};
}

std::string extract_reference(std::span<const Document> docs, std::span<const std::string> answers) {
  std::vector<std::vector<std::string>> answer_tokens;
  for (const auto& a : answers) {
    auto t = index_terms(a);
    if (!t.empty()) answer_tokens.push_back(std::move(t));
  }
  const std::string* best = nullptr;
  std::size_t best_overlap = 0;
  for (const auto& d : docs) {
    for (const auto& s : d.sentences) {
      auto st = index_terms(s);
      for (const auto& at : answer_tokens) {
        if (std::search(st.begin(), st.end(), at.begin(), at.end()) != st.end()) return s;
      }
      std::unordered_set<std::string> present(st.begin(), st.end());
      std::size_t overlap = 0;
      for (const auto& at : answer_tokens) {
        for (const auto& t : at) overlap += present.count(t);
      }
      if (!best || overlap > best_overlap) {
        best = &s;
        best_overlap = overlap;
      }
    }
  }
  return best ? *best : std::string();
}

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> out;
    std::istringstream in(detail::kStopwordsV1);
    std::string line;
    while (std::getline(in, line)) {
      auto w = collapse_whitespace(line);
      if (w.empty() || w.front() == '#') continue;
      out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    return out;
  }();
  return words;
}

std::string strip_stopwords(std::string_view text) {
  const auto& stop = stopwords();
  std::string out;
  for (const auto& t : index_terms(text)) {
    if (std::binary_search(stop.begin(), stop.end(), t)) continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

namespace {

std::string summary_of(const Document& d) {
  std::string out;
  for (std::size_t i = 0; i < d.sentences.size() && i < 2; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += d.sentences[i];
  }
  return out;
}

std::string docid_input(std::string_view prefix, const DocId& id) {
  std::vector<DocId> one{id};
  return with_prefix(prefix, render_docid_list(one));
}

}  // namespace

std::vector<TrainingExample> make_docid_understanding_examples(const Corpus& corpus, const Bm25Index& index,
                                                               const Reranker& reranker, const AuxOptions& options,
                                                               Rng& rng) {
  if (corpus.empty()) throw InvalidArgument("DocId understanding tasks need a non-empty corpus");
  const auto& ids = corpus.doc_ids();
  std::vector<TrainingExample> out;
  auto sample = [&]() { return corpus.get(ids[uniform_index(rng, ids.size())]); };
  auto skip = [](const Document& d, const char* why) {
    spdlog::warn("skipping '{}' for DocId understanding: {}", d.doc_id, why);
  };

  for (std::size_t i = 0; i < options.per_task_count; ++i) {
    auto d = sample();
    if (d.sentences.empty()) {
      skip(d, "no sentences");
      continue;
    }
    const auto& sentence = d.sentences[uniform_index(rng, d.sentences.size())];
    auto query = strip_stopwords(sentence);
    if (query.empty()) query = normalize_tokens(sentence);
    std::vector<DocId> self{d.doc_id};
    auto list = construct_ranked_docid_list(query, self, index, reranker, options.list_length, options.candidates);
    out.push_back({Task::kAuxQuery2DocIds, with_prefix(kQuery2DocIdPrefix, query), render_docid_list(list), false});
  }

  for (std::size_t i = 0; i < options.per_task_count; ++i) {
    auto d = sample();
    if (d.sentences.empty()) {
      skip(d, "no sentences");
      continue;
    }
    auto summary = summary_of(d);
    std::vector<DocId> self{d.doc_id};
    auto list = construct_ranked_docid_list(summary, self, index, reranker, options.list_length, options.candidates);
    out.push_back({Task::kAuxSummary2DocIds, with_prefix(kSummary2DocIdPrefix, summary), render_docid_list(list),
                   false});
  }

  for (std::size_t i = 0; i < options.per_task_count; ++i) {
    auto d = sample();
    if (d.sentences.empty()) {
      skip(d, "no sentences");
      continue;
    }
    out.push_back({Task::kAuxDocId2Summary, docid_input(kDocId2SummaryPrefix, d.doc_id), summary_of(d), false});
  }

  for (std::size_t i = 0; i < options.per_task_count; ++i) {
    auto d = sample();
    if (d.sentences.empty()) {
      skip(d, "no sentences");
      continue;
    }
    auto list =
        construct_ranked_docid_list(d.body, {}, index, reranker, options.list_length + 1, options.candidates);
    std::erase(list, d.doc_id);
    if (list.size() > options.list_length) list.resize(options.list_length);
    if (list.empty()) {
      skip(d, "no related documents");
      continue;
    }
    out.push_back({Task::kAuxDocId2Related, docid_input(kDocId2RelatedPrefix, d.doc_id), render_docid_list(list),
                   false});
  }
  return out;
}

double sequence_loss(const LmScorer& lm, const TrainingExample& example) {
  if (collapse_whitespace(example.target).empty()) throw InvalidArgument("training example has an empty target");
  const auto& vocab = lm.vocabulary();
  auto target = vocab.encode(example.target);
  target.push_back(kEos);
  return -score_sequence(lm, vocab.encode(example.input), target);
}

double combine(const LossWeights& w, double l_rank, double l_gen, double l_rag, double l_aux) {
  return w.rank * l_rank + w.gen * l_gen + w.rag * l_rag + w.aux * l_aux;
}

LossBreakdown combined_loss(const LmScorer& lm, std::span<const TrainingExample> batch, const LossWeights& weights,
                            double tau) {
  if (weights.rank < 0 || weights.gen < 0 || weights.rag < 0 || weights.aux < 0) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  LossBreakdown out;
  for (const auto& e : batch) {
    double l = sequence_loss(lm, e);
    switch (e.task) {
      case Task::kRetrieval:
        out.l_rank += l;
        break;
      case Task::kClosedBook:
        out.l_gen += l;
        break;
      case Task::kRagReference:
        out.l_ref += l;
        break;
      case Task::kRagAnswer:
        out.l_ans += e.noise_flag ? tau * l : l;
        break;
      default:
        out.l_aux += l;
        break;
    }
  }
  out.l_rag = out.l_ref + out.l_ans;
  out.combined = combine(weights, out.l_rank, out.l_gen, out.l_rag, out.l_aux);
  return out;
}

}  // namespace genret
