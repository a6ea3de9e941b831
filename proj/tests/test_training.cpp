#include <map>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "genret/bm25.hpp"
#include "genret/errors.hpp"
#include "genret/prompts.hpp"
#include "genret/training.hpp"
#include "support.hpp"

using namespace genret;

namespace {

Corpus fruit_corpus() {
  return Corpus::from_documents({make_document("one", "", "apple pie"), make_document("two", "", "berry pie"),
                                 make_document("three", "", "cherry pie")});
}

// Fixed-order reranker for merge tests.
class ListReranker final : public Reranker {
 public:
  explicit ListReranker(std::vector<DocId> order) : order_(std::move(order)) {}
  std::vector<DocId> rerank(std::string_view, std::span<const DocId>) const override { return order_; }

 private:
  std::vector<DocId> order_;
};

double hand_bm25(double tf, double n_t, double n, double len, double avg, double k1 = 1.2, double b = 0.75) {
  double idf = std::log((n - n_t + 0.5) / (n_t + 0.5) + 1);
  return idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
}

}  // namespace

TEST_CASE("bm25 closed form") {
  auto corpus = fruit_corpus();
  auto index = Bm25Index::build(corpus);
  CHECK(index.params().k1 == 1.2);
  CHECK(index.params().b == 0.75);
  CHECK(index.average_length() == 3.0);
  auto hits = index.retrieve("apple", 10);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].first == "one #");
  CHECK(std::abs(hits[0].second - std::log(8.0 / 3.0)) < 1e-9);
  CHECK(index.retrieve("zzz", 10).empty());
  CHECK(index.postings("zzz").empty());
  auto twice = index.retrieve("apple apple", 10);
  CHECK(std::abs(twice[0].second - 2 * std::log(8.0 / 3.0)) < 1e-9);
}

TEST_CASE("bm25 against a hand computation") {
  auto corpus = Corpus::from_documents({make_document("cat", "", "the cat sat on the cat mat"),
                                        make_document("dog", "", "a dog"),
                                        make_document("bird", "", "cat and bird and cat and cat")});
  auto index = Bm25Index::build(corpus);
  // lengths: 8, 3, 8 (titles included)
  CHECK(index.doc_length(0) == 8);
  CHECK(index.doc_length(1) == 3);
  CHECK(index.doc_length(2) == 8);
  double avg = 19.0 / 3.0;
  CHECK(index.average_length() == doctest::Approx(avg).epsilon(1e-15));
  auto postings = index.postings("cat");
  REQUIRE(postings.size() == 2);
  CHECK(postings[0].doc == 0);
  CHECK(postings[0].tf == 3);
  CHECK(postings[1].doc == 2);
  CHECK(postings[1].tf == 3);

  auto hits = index.retrieve("cat dog", 10);
  REQUIRE(hits.size() == 3);
  double cat0 = hand_bm25(3, 2, 3, 8, avg);
  double dog1 = hand_bm25(2, 1, 3, 3, avg);
  CHECK(hits[0].first == "dog #");
  CHECK(std::abs(hits[0].second - dog1) < 1e-9);
  // equal scores fall back to DocId order
  CHECK(hits[1].first == "bird #");
  CHECK(hits[2].first == "cat #");
  CHECK(std::abs(hits[1].second - cat0) < 1e-9);
  CHECK(std::abs(hits[2].second - cat0) < 1e-9);
  CHECK(index.retrieve("cat dog", 1).size() == 1);

  Corpus empty;
  CHECK_THROWS_AS(Bm25Index::build(empty), InvalidArgument);
}

TEST_CASE("merge rule") {
  std::vector<DocId> labeled = {"D3"}, reranked = {"D1", "D3", "D2"};
  CHECK(merge_ranked(labeled, reranked, 3) == std::vector<DocId>{"D3", "D1", "D2"});
  CHECK(merge_ranked({}, reranked, 5) == reranked);
  std::vector<DocId> many = {"A", "B", "C"};
  CHECK(merge_ranked(many, reranked, 2) == std::vector<DocId>{"A", "B"});

  auto corpus = Corpus::from_documents({make_document("D1", "", "x"), make_document("D2", "", "x"),
                                        make_document("D3", "", "x")});
  auto index = Bm25Index::build(corpus);
  ListReranker fixed({"D1 #", "D3 #", "D2 #"});
  std::vector<DocId> lab = {"D3 #"};
  CHECK(construct_ranked_docid_list("x", lab, index, fixed, 3) == std::vector<DocId>{"D3 #", "D1 #", "D2 #"});
  std::vector<DocId> unknown = {"D9 #"};
  CHECK_THROWS_AS(construct_ranked_docid_list("x", unknown, index, fixed, 3), NotFound);
}

TEST_CASE("merge rule properties") {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    auto pick = [&](std::size_t n) {
      std::vector<DocId> v;
      for (std::size_t j = 0; j < n; ++j) v.push_back("D" + std::to_string(uniform_index(rng, 12)));
      return v;
    };
    auto labeled = pick(uniform_index(rng, 5));
    std::sort(labeled.begin(), labeled.end());
    labeled.erase(std::unique(labeled.begin(), labeled.end()), labeled.end());
    auto reranked = pick(uniform_index(rng, 15));
    auto k = labeled.size() + uniform_index(rng, 6);
    if (k == 0) k = 1;
    auto out = merge_ranked(labeled, reranked, k);
    CHECK(out.size() <= k);
    CHECK(std::set<DocId>(out.begin(), out.end()).size() == out.size());
    auto prefix = std::min(labeled.size(), k);
    CHECK(std::equal(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(prefix), out.begin()));
  }
}

TEST_CASE("overlap reranker keeps BM25 order on ties") {
  auto corpus = fruit_corpus();
  OverlapReranker rr(corpus);
  std::vector<DocId> cands = {"two #", "one #", "three #"};
  CHECK(rr.rerank("apple pie", cands) == std::vector<DocId>{"one #", "two #", "three #"});
  CHECK(rr.rerank("none", cands) == cands);
}

TEST_CASE("retrieval and closed-book examples") {
  std::vector<DocId> one = {"a # x"};
  auto e = make_retrieval_example("who", one);
  CHECK(e.task == Task::kRetrieval);
  CHECK(e.input == "retrieve: who");
  CHECK(e.target == "<docid> a # x </docid>");
  std::vector<DocId> two = {"a # x", "b #"};
  auto e2 = make_retrieval_example("who", two);
  CHECK(e2.target == "<docid> a # x </docid> <docid> b # </docid>");
  CHECK(parse_docid_list(e2.target) == two);
  CHECK_THROWS_AS(parse_docid_list("<docid> </docid>"), ParseError);
  CHECK_THROWS_AS(parse_docid_list("<docid> a"), ParseError);
  auto cb = make_closed_book_example("q", "yes");
  CHECK(cb.input == "answer: q");
  CHECK(cb.target == "<answer> yes");
}

TEST_CASE("rag examples and noise sampling") {
  std::vector<Document> ctx = {make_document("t", "", "First one. Second one."), make_document("u", "", "Third.")};
  Rng rng(1);
  auto clean = make_rag_examples("q", ctx, "gold ref", "gold", 0.0, rng);
  REQUIRE(clean.size() == 2);
  CHECK(clean[0].task == Task::kRagReference);
  CHECK(clean[0].target == "<ref> gold ref </ref>");
  CHECK(clean[1].task == Task::kRagAnswer);
  CHECK(clean[1].target == "<answer> gold");
  CHECK(clean[1].input == clean[0].input + " <ref> gold ref </ref>");
  CHECK(clean[0].input.rfind("rag: q <docid> t # </docid> <docid> u # </docid>", 0) == 0);
  CHECK_FALSE(clean[1].noise_flag);

  std::set<std::string> sentences = {"First one.", "Second one.", "Third."};
  for (int i = 0; i < 50; ++i) {
    auto noisy = make_rag_examples("q", ctx, "gold ref", "gold", 1.0, rng);
    CHECK(noisy[1].noise_flag);
    auto tail = noisy[1].input.substr(noisy[0].input.size());
    bool found = false;
    for (const auto& s : sentences) found = found || tail == " " + render_reference(s);
    CHECK(found);
  }

  std::size_t flagged = 0;
  Rng seeded(2);
  for (int i = 0; i < 10000; ++i) flagged += make_rag_examples("q", ctx, "r", "a", 0.2, seeded)[1].noise_flag;
  CHECK(flagged >= 1700);
  CHECK(flagged <= 2300);

  std::vector<Document> silent = {make_document("v", "", "")};
  CHECK_THROWS_AS(make_rag_examples("q", silent, "r", "a", 0.2, rng), InvalidArgument);
  CHECK_NOTHROW(make_rag_examples("q", silent, "r", "a", 0.0, rng));
  CHECK_THROWS_AS(make_rag_examples("q", ctx, "r", "a", 1.5, rng), InvalidArgument);
}

TEST_CASE("reference extraction") {
  std::vector<Document> ctx = {make_document("t", "", "Nothing here. Paris is big."), make_document("u", "", "x.")};
  std::vector<std::string> answers = {"Paris"};
  CHECK(extract_reference(ctx, answers) == "Paris is big.");
  std::vector<std::string> none = {"Rome"};
  CHECK(extract_reference(ctx, none) == "Nothing here.");
  CHECK(extract_reference({}, answers).empty());
}

TEST_CASE("stopwords") {
  const auto& s = stopwords();
  CHECK(s.size() >= 100);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::binary_search(s.begin(), s.end(), "the"));
  CHECK(strip_stopwords("The cat is on the Mat.") == "cat mat");
}

TEST_CASE("DocId understanding tasks") {
  Rng rng(3);
  auto corpus = Corpus::from_documents(testing::random_documents(rng, 30));
  auto index = Bm25Index::build(corpus);
  OverlapReranker rr(corpus);
  AuxOptions opts;
  opts.per_task_count = 20;
  auto examples = make_docid_understanding_examples(corpus, index, rr, opts, rng);
  std::map<Task, int> counts;
  for (const auto& e : examples) {
    ++counts[e.task];
    if (e.task == Task::kAuxDocId2Summary) continue;
    auto list = parse_docid_list(e.target);
    CHECK_FALSE(list.empty());
    CHECK(list.size() <= opts.list_length);
    CHECK(std::set<DocId>(list.begin(), list.end()).size() == list.size());
    for (const auto& id : list) CHECK(corpus.contains(id));
    if (e.task == Task::kAuxDocId2Related) {
      auto self = parse_docid_list(e.input.substr(e.input.find("<docid>")));
      CHECK(std::find(list.begin(), list.end(), self[0]) == list.end());
    }
  }
  CHECK(counts[Task::kAuxQuery2DocIds] == 20);
  CHECK(counts[Task::kAuxSummary2DocIds] == 20);
  CHECK(counts[Task::kAuxDocId2Summary] == 20);

  auto pair = Corpus::from_documents({make_document("x", "", "shared words here."), make_document("y", "", "shared.")});
  auto pair_index = Bm25Index::build(pair);
  OverlapReranker pair_rr(pair);
  AuxOptions few;
  few.per_task_count = 10;
  Rng r2(9);
  for (const auto& e : make_docid_understanding_examples(pair, pair_index, pair_rr, few, r2)) {
    auto self_id = e.task == Task::kAuxDocId2Summary || e.task == Task::kAuxDocId2Related
                       ? parse_docid_list(e.input.substr(e.input.find("<docid>")))[0]
                       : DocId();
    if (e.task == Task::kAuxDocId2Summary) {
      CHECK(e.target == pair.get(self_id).sentences[0]);
    } else if (e.task == Task::kAuxDocId2Related) {
      CHECK(parse_docid_list(e.target) == std::vector<DocId>{self_id == "x #" ? "y #" : "x #"});
    } else {
      CHECK(parse_docid_list(e.target).size() == 2);
    }
  }
}

TEST_CASE("a pseudo query target starts with its source") {
  auto corpus = Corpus::from_documents({make_document("solo", "", "Unique zebra words.")});
  auto index = Bm25Index::build(corpus);
  OverlapReranker rr(corpus);
  AuxOptions opts;
  opts.per_task_count = 3;
  Rng rng(1);
  for (const auto& e : make_docid_understanding_examples(corpus, index, rr, opts, rng)) {
    if (e.task == Task::kAuxQuery2DocIds) {
      CHECK(e.input == "query2docid: unique zebra words");
      CHECK(parse_docid_list(e.target)[0] == "solo #");
    }
    CHECK(e.task != Task::kAuxDocId2Related);
  }
}

TEST_CASE("example serialization") {
  std::vector<TrainingExample> examples = {{Task::kRetrieval, "retrieve: q", "<docid> a # </docid>", false},
                                           {Task::kRagAnswer, "rag: q", "<answer> x", true},
                                           {Task::kAuxDocId2Related, "in", "out", false}};
  std::stringstream buf;
  buf << R"({"run_config":{"seed":0}})" << '\n';
  write_examples(buf, examples);
  CHECK(read_examples(buf) == examples);
  for (auto t : {Task::kRetrieval, Task::kClosedBook, Task::kRagReference, Task::kRagAnswer, Task::kAuxQuery2DocIds,
                 Task::kAuxSummary2DocIds, Task::kAuxDocId2Summary, Task::kAuxDocId2Related}) {
    CHECK(parse_task(task_name(t)) == t);
  }
  CHECK_THROWS_AS(parse_task("nope"), InvalidArgument);
  std::istringstream bad(R"({"task":"retrieval"})");
  CHECK_THROWS_AS(read_examples(bad), ParseError);
}

TEST_CASE("sequence loss") {
  auto vocab = Vocabulary::from_words({"a", "b", "c"});
  UniformLm lm(vocab);
  TrainingExample e{Task::kClosedBook, "a", "a b c", false};
  CHECK(std::abs(sequence_loss(lm, e) - 4 * std::log(10.0)) < 1e-9);
  CHECK(sequence_loss(lm, e) == doctest::Approx(9.2103).epsilon(1e-4));
  TrainingExample empty{Task::kClosedBook, "a", "  ", false};
  CHECK_THROWS_AS(sequence_loss(lm, empty), InvalidArgument);

  auto seq = vocab.encode("a a b c");
  seq.push_back(kEos);
  std::vector<std::vector<TokenId>> texts = {seq};
  NgramLm memo(vocab, texts, {3, 0.1});
  CHECK(sequence_loss(memo, e) > 0);
  CHECK(sequence_loss(memo, e) < sequence_loss(lm, e));
}

TEST_CASE("combined loss identities") {
  CHECK(combine({}, 1, 2, 3, 4) == 10);
  CHECK(combine({1, 0, 0, 0}, 1, 2, 3, 4) == 1);

  auto vocab = Vocabulary::from_words({"a", "b", "c", "d"});
  std::vector<std::vector<TokenId>> texts = {{7, 8, 9, 10, 7, 9}};
  NgramLm lm(vocab, texts, {2, 0.2});
  std::vector<TrainingExample> batch = {
      {Task::kRetrieval, "retrieve: a", "<docid> a b </docid>", false},
      {Task::kClosedBook, "answer: b", "<answer> c", false},
      {Task::kRagReference, "rag: c", "<ref> d </ref>", false},
      {Task::kRagAnswer, "rag: c <ref> d </ref>", "<answer> a", false},
      {Task::kRagAnswer, "rag: c <ref> b </ref>", "<answer> a", true},
      {Task::kAuxQuery2DocIds, "query2docid: a", "<docid> a b </docid>", false},
      {Task::kAuxDocId2Summary, "docid2summary: a", "b c", false},
  };
  auto l = combined_loss(lm, batch);
  CHECK(l.l_rag == l.l_ref + l.l_ans);
  CHECK(l.l_rank == sequence_loss(lm, batch[0]));
  CHECK(l.l_gen == sequence_loss(lm, batch[1]));
  CHECK(l.l_ref == sequence_loss(lm, batch[2]));
  CHECK(std::abs(l.l_ans - (sequence_loss(lm, batch[3]) + 0.2 * sequence_loss(lm, batch[4]))) < 1e-12);
  CHECK(std::abs(l.l_aux - (sequence_loss(lm, batch[5]) + sequence_loss(lm, batch[6]))) < 1e-12);
  CHECK(l.combined == l.l_rank + l.l_gen + l.l_rag + l.l_aux);

  LossWeights w{0.5, 2, 0, 3};
  auto lw = combined_loss(lm, batch, w);
  CHECK(lw.combined == doctest::Approx(0.5 * l.l_rank + 2 * l.l_gen + 3 * l.l_aux).epsilon(1e-12));
  auto only_rank = combined_loss(lm, batch, {1, 0, 0, 0});
  CHECK(only_rank.combined == l.l_rank);
  CHECK_THROWS_AS(combined_loss(lm, batch, {-1, 1, 1, 1}), InvalidArgument);
}
