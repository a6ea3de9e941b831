#include <sstream>

#include "doctest.h"
#include "genret/errors.hpp"
#include "genret/evaluation.hpp"
#include "support.hpp"

using namespace genret;

namespace {

using Ids = std::vector<DocId>;
using Strs = std::vector<std::string>;

}  // namespace

TEST_CASE("normalization") {
  CHECK(normalize_answer("The Answer!") == "answer");
  CHECK(normalize_answer("  An  apple,  a day ") == "apple day");
  CHECK(normalize_answer("") == "");
  Rng rng(1);
  const std::string alphabet = "aAbn the.,! ";
  for (int i = 0; i < 300; ++i) {
    std::string s;
    for (std::size_t j = 0, n = uniform_index(rng, 20); j < n; ++j) s.push_back(alphabet[uniform_index(rng, alphabet.size())]);
    auto once = normalize_answer(s);
    CHECK(normalize_answer(once) == once);
    Strs gold = {"a b", "the cat"};
    CHECK(f1(once, gold) == f1(s, gold));
    CHECK(rouge_l(once, gold) == rouge_l(s, gold));
    CHECK(exact_match(once, gold) == exact_match(s, gold));
  }
}

TEST_CASE("retrieval metrics") {
  CHECK(r_precision(Ids{"A", "B", "C"}, Ids{"A"}) == 1.0);
  CHECK(r_precision(Ids{"A", "C", "B"}, Ids{"A", "B"}) == 0.5);
  CHECK(r_precision(Ids{}, Ids{"A"}) == 0.0);
  CHECK(recall_at_k(Ids{"B", "X"}, Ids{"A", "B"}, 1) == 0.5);
  CHECK(recall_at_k(Ids{"B", "A"}, Ids{"A", "B"}, 5) == 1.0);
  CHECK(recall_at_k(Ids{"X", "Y"}, Ids{"A", "B"}, 2) == 0.0);
  CHECK_THROWS_AS(r_precision(Ids{"A"}, Ids{}), UndefinedMetric);
  CHECK_THROWS_AS(recall_at_k(Ids{"A"}, Ids{}, 1), UndefinedMetric);
}

TEST_CASE("r_precision is recall at |provenance|") {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    Ids retrieved, provenance;
    for (std::size_t j = 0, n = uniform_index(rng, 12); j < n; ++j) retrieved.push_back("D" + std::to_string(uniform_index(rng, 15)));
    std::set<DocId> prov;
    for (std::size_t j = 0, n = 1 + uniform_index(rng, 6); j < n; ++j) prov.insert("D" + std::to_string(uniform_index(rng, 15)));
    provenance.assign(prov.begin(), prov.end());
    CHECK(r_precision(retrieved, provenance) == recall_at_k(retrieved, provenance, provenance.size()));
    auto before = recall_at_k(retrieved, provenance, 20);
    retrieved.push_back(provenance.front());
    CHECK(recall_at_k(retrieved, provenance, 20) >= before);
  }
}

TEST_CASE("answer metrics") {
  CHECK(exact_match("The Answer!", Strs{"answer"}) == 1);
  CHECK(exact_match("same", Strs{"same"}) == 1);
  CHECK(exact_match("yes", Strs{"no"}) == 0);
  CHECK(accuracy("SUPPORTS.", Strs{"supports"}) == 1);
  CHECK(accuracy("refutes", Strs{"supports"}) == 0);
  // "a" is an article, so these normalize to "b" against "c" and "b c" against "c".
  CHECK(f1("a b", Strs{"a c"}) == 0.0);
  CHECK(rouge_l("a b c", Strs{"a c"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f1("x y", Strs{"x z"}) == 0.5);
  CHECK(f1("x y", Strs{"x y"}) == 1.0);
  CHECK(f1("x y", Strs{"z"}) == 0.0);
  CHECK(f1("", Strs{"the"}) == 1.0);
  CHECK(f1("x", Strs{""}) == 0.0);
  CHECK(rouge_l("x y z", Strs{"x z"}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(rouge_l("x y z", Strs{"x y z"}) == 1.0);
  CHECK(rouge_l("x y", Strs{"z w"}) == 0.0);
  CHECK(has_answer("the answer is paris", Strs{"Paris"}) == 1);
  CHECK(has_answer("paris", Strs{"paris"}) == 1);
  CHECK(has_answer("", Strs{"paris"}) == 0);
  CHECK(has_answer("new paris york", Strs{"new york"}) == 0);
  CHECK(f1("x y", Strs{"q", "x z"}) == 0.5);
}

TEST_CASE("F-measures are symmetric for single golds") {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    auto a = testing::random_words(rng, 0, 6, 5), b = testing::random_words(rng, 0, 6, 5);
    CHECK(f1(a, Strs{b}) == doctest::Approx(f1(b, Strs{a})).epsilon(1e-15));
    CHECK(rouge_l(a, Strs{b}) == doctest::Approx(rouge_l(b, Strs{a})).epsilon(1e-15));
  }
}

TEST_CASE("reports") {
  std::vector<GoldRecord> gold = {
      {"q1", "in", {"paris"}, {"A #"}, {{"A #"}}},
      {"q2", "in", {"rome"}, {"B #", "C #"}, {{"B #"}, {"C #"}}},
      {"q3", "in", {}, {}, {}},
  };
  std::vector<Prediction> preds = {{"q1", {"A #"}, {}, "Paris"}, {"q2", {"X #", "C #"}, {}, "london"}};
  auto r = evaluate(preds, gold, TaskCategory::kRetrieval);
  CHECK(r.query_count == 2);
  CHECK(r.per_query[0].metrics.at("r_precision") == 1.0);
  // best group is {C}: C sits at rank 2
  CHECK(r.per_query[1].metrics.at("r_precision") == 0.0);
  CHECK(r.per_query[1].metrics.at("recall@5") == 1.0);
  CHECK(r.metrics.at("r_precision") == 0.5);
  CHECK(r.metrics.at("recall@5") == 1.0);

  auto qa = evaluate(preds, gold, TaskCategory::kQa);
  CHECK(qa.metrics.size() == 3);
  CHECK(qa.metrics.at("em") == 0.5);
  CHECK(qa.metrics.at("has_answer") == 0.5);

  std::vector<Prediction> skipped = {{"q3", {}, {}, "x"}};
  auto s = evaluate(skipped, gold, TaskCategory::kRetrieval);
  CHECK(s.query_count == 0);
  CHECK(s.warnings.size() == 1);

  auto none = evaluate({}, gold, TaskCategory::kDialogue);
  CHECK(none.query_count == 0);
  CHECK_FALSE(none.warnings.empty());

  std::vector<Prediction> missing = {{"q9", {}, {}, ""}};
  try {
    evaluate(missing, gold, TaskCategory::kQa);
    FAIL("expected NotFound");
  } catch (const NotFound& e) {
    CHECK(std::string(e.what()).find("q9") != std::string::npos);
  }
}

TEST_CASE("aggregates are means of the per-query values") {
  Rng rng(10);
  std::vector<GoldRecord> gold;
  std::vector<Prediction> preds;
  for (int i = 0; i < 50; ++i) {
    auto id = "q" + std::to_string(i);
    gold.push_back({id, "in", {testing::random_words(rng, 1, 3, 6)}, {"A #"}, {{"A #"}}});
    preds.push_back({id, {}, {}, testing::random_words(rng, 0, 4, 6)});
  }
  for (auto cat : {TaskCategory::kQa, TaskCategory::kLongForm, TaskCategory::kDialogue, TaskCategory::kClassification}) {
    auto r = evaluate(preds, gold, cat);
    for (const auto& [name, value] : r.metrics) {
      double sum = 0;
      for (const auto& q : r.per_query) sum += q.metrics.at(name);
      CHECK(std::abs(value - sum / 50) <= 1e-12);
      CHECK(value >= 0);
      CHECK(value <= 1);
    }
  }
}

TEST_CASE("categories and prediction files") {
  CHECK(category_metrics(parse_category("longform")) == Strs{"rouge_l", "f1", "has_answer"});
  CHECK(category_name(TaskCategory::kDialogue) == "dialogue");
  CHECK_THROWS_AS(parse_category("nope"), InvalidArgument);
  std::istringstream in(R"({"run_config":{}})"
                        "\n"
                        R"({"query_id":"q1","docids":["A #"],"references":["r"],"answer":"x","cost":{}})"
                        "\n");
  auto p = read_predictions(in);
  REQUIRE(p.size() == 1);
  CHECK(p[0].docids == Ids{"A #"});
  CHECK(p[0].answer == "x");
  std::istringstream bad("{\"docids\":[]}\n");
  CHECK_THROWS_AS(read_predictions(bad), ParseError);
}
