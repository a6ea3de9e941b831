#include "cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "genret/corpus.hpp"
#include "genret/decoder.hpp"
#include "genret/docid_trie.hpp"
#include "genret/errors.hpp"
#include "genret/evaluation.hpp"
#include "genret/language_model.hpp"
#include "genret/prompts.hpp"
#include "genret/vocabulary.hpp"

namespace genret::cli {

using json = nlohmann::json;

json to_json(const RunConfig& c) {
  return json{
      {"command", c.command},
      {"corpus", c.corpus},
      {"gold", c.gold},
      {"out", c.out},
      {"train", c.train},
      {"examples", c.examples},
      {"pred", c.pred},
      {"task", c.task},
      {"mode", c.mode},
      {"remote_lm", c.remote_lm},
      {"k_retrieve", c.k_retrieve},
      {"k_context", c.k_context},
      {"tau", c.tau},
      {"lambda", {c.lambda.rank, c.lambda.gen, c.lambda.rag, c.lambda.aux}},
      {"ngram_order", c.ngram_order},
      {"alpha", c.alpha},
      {"bm25_k1", c.bm25.k1},
      {"bm25_b", c.bm25.b},
      {"budget", c.budget},
      {"answer_cap", c.answer_cap},
      {"reference_cap", c.reference_cap},
      {"per_task", c.per_task},
      {"candidates", c.candidates},
      {"seed", c.seed},
  };
}

LossWeights parse_lambda(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (collapse_whitespace(item.substr(used)).size() != 0) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("--lambda expects four comma-separated numbers, got '" + text + "'");
    }
  }
  if (values.size() != 4) throw InvalidArgument("--lambda expects four comma-separated numbers, got '" + text + "'");
  for (double v : values) {
    if (v < 0) throw InvalidArgument("--lambda weights must be non-negative");
  }
  return {values[0], values[1], values[2], values[3]};
}

namespace {

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw InvalidArgument(std::string("missing required flag ") + flag);
}

// Writes to a sibling temporary and renames on success, so a failing
// command never leaves partial output behind.
void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    fill(out);
    out.flush();
    if (!out) throw Error("failed writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_document(const std::filesystem::path& path, const json& doc) {
  write_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

std::string header_line(const RunConfig& c) { return json{{"run_config", to_json(c)}}.dump(); }

// Everything the retrieval/generation commands derive from their inputs.
struct Engine {
  Corpus corpus;
  std::vector<GoldRecord> gold;
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> scored;  // only contributes vocabulary
  Vocabulary vocab;
};

std::vector<TrainingExample> read_examples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open examples file " + path);
  return read_examples(in);
}

std::unique_ptr<Engine> load_engine(const RunConfig& c, bool need_gold) {
  require(c.corpus, "--corpus");
  auto e = std::make_unique<Engine>();
  e->corpus = ingest_corpus(c.corpus);
  if (need_gold) require(c.gold, "--gold");
  if (!c.gold.empty()) e->gold = load_gold(c.gold);
  if (!c.train.empty()) e->train = read_examples_file(c.train);
  if (!c.examples.empty()) e->scored = read_examples_file(c.examples);

  std::vector<std::string> extra;
  for (auto p : {kRetrievePrefix, kAnswerPrefix, kRagPrefix, kQuery2DocIdPrefix, kSummary2DocIdPrefix,
                 kDocId2SummaryPrefix, kDocId2RelatedPrefix}) {
    extra.emplace_back(p);
  }
  for (const auto& g : e->gold) {
    extra.push_back(g.input);
    for (const auto& a : g.answers) extra.push_back(a);
  }
  for (const auto* set : {&e->train, &e->scored}) {
    for (const auto& t : *set) {
      extra.push_back(t.input);
      extra.push_back(t.target);
    }
  }
  e->vocab = build_vocabulary(e->corpus, extra);
  spdlog::info("loaded {} documents, vocabulary of {} tokens", e->corpus.size(), e->vocab.size());
  return e;
}

std::unique_ptr<LmScorer> make_lm(const RunConfig& c, const Engine& e) {
  if (!c.remote_lm.empty()) {
    RemoteOptions opts;
    opts.timeout = std::chrono::milliseconds(static_cast<long long>(c.remote_timeout_s * 1000));
    return std::make_unique<RemoteLm>(e.vocab, c.remote_lm, opts);
  }
  std::vector<std::vector<TokenId>> texts;
  e.corpus.for_each([&](const Document& d) { texts.push_back(e.vocab.encode(d.body)); });
  for (const auto& t : e.train) {
    auto seq = e.vocab.encode(t.input + " " + t.target);
    seq.push_back(kEos);
    texts.push_back(std::move(seq));
  }
  NgramOptions opts;
  opts.order = c.ngram_order;
  opts.alpha = c.alpha;
  return std::make_unique<NgramLm>(e.vocab, texts, opts);
}

json cost_json(const DecodeCost& cost) {
  return {{"scorer_calls", cost.scorer_calls}, {"context_tokens", cost.context_tokens}};
}

RagOptions rag_options(const RunConfig& c) {
  RagOptions o;
  o.k_retrieve = c.k_retrieve;
  o.k_context = c.k_context;
  o.document_budget = c.budget;
  o.reference_cap = c.reference_cap;
  o.answer_cap = c.answer_cap;
  return o;
}

}  // namespace

int run_ingest(const RunConfig& c) {
  require(c.out, "--out");
  auto e = load_engine(c, false);
  std::filesystem::path dir(c.out);
  write_file(dir / "vocab.txt", [&](std::ostream& out) { e->vocab.save(out); });
  json doc = {{"run_config", to_json(c)},
              {"stats",
               {{"document_count", e->corpus.stats().document_count},
                {"token_count", e->corpus.stats().token_count},
                {"vocabulary_size", e->vocab.size()}}}};
  write_json_document(dir / "ingest.json", doc);
  return 0;
}

int run_index(const RunConfig& c) {
  require(c.out, "--out");
  auto e = load_engine(c, false);
  auto trie = DocIdTrie::build(e->corpus, e->vocab);
  std::filesystem::path dir(c.out);
  write_file(dir / "vocab.txt", [&](std::ostream& out) { e->vocab.save(out); });
  write_file(dir / "trie.txt", [&](std::ostream& out) { trie.save_snapshot(out); });
  json doc = {{"run_config", to_json(c)},
              {"trie", {{"nodes", trie.node_count()}, {"docids", trie.doc_count()}}}};
  if (!e->corpus.empty()) {
    auto index = Bm25Index::build(e->corpus, c.bm25);
    doc["bm25"] = {{"documents", index.doc_count()}, {"average_length", index.average_length()}};
  }
  write_json_document(dir / "index.json", doc);
  return 0;
}

int run_traindata(const RunConfig& c) {
  require(c.out, "--out");
  auto e = load_engine(c, true);
  auto index = Bm25Index::build(e->corpus, c.bm25);
  OverlapReranker reranker(e->corpus);
  Rng rng(c.seed);

  std::vector<TrainingExample> examples;
  for (const auto& g : e->gold) {
    std::vector<DocId> labeled;
    for (const auto& id : g.provenance) {
      if (e->corpus.contains(id)) {
        labeled.push_back(id);
      } else {
        spdlog::warn("query '{}': provenance '{}' is not in the corpus", g.query_id, id);
      }
    }
    if (labeled.size() > c.k_retrieve) labeled.resize(c.k_retrieve);
    auto ranked = construct_ranked_docid_list(g.input, labeled, index, reranker, c.k_retrieve, c.candidates);
    if (!ranked.empty()) examples.push_back(make_retrieval_example(g.input, ranked));
    if (g.answers.empty()) continue;

    const auto& answer = g.answers.front();
    examples.push_back(make_closed_book_example(g.input, answer));

    std::vector<Document> context;
    for (std::size_t i = 0; i < ranked.size() && i < c.k_context; ++i) context.push_back(e->corpus.get(ranked[i]));
    if (context.empty()) continue;
    std::vector<Document> evidence;
    for (const auto& id : labeled) evidence.push_back(e->corpus.get(id));
    auto reference = extract_reference(evidence.empty() ? context : evidence, g.answers);
    bool has_sentences = false;
    for (const auto& d : context) has_sentences = has_sentences || !d.sentences.empty();
    double tau = has_sentences ? c.tau : 0.0;
    auto rag = make_rag_examples(g.input, context, reference, answer, tau, rng, c.budget);
    examples.insert(examples.end(), rag.begin(), rag.end());
  }

  AuxOptions aux;
  aux.per_task_count = c.per_task;
  aux.list_length = c.k_retrieve;
  aux.candidates = c.candidates;
  auto aux_examples = make_docid_understanding_examples(e->corpus, index, reranker, aux, rng);
  examples.insert(examples.end(), aux_examples.begin(), aux_examples.end());

  write_file(c.out, [&](std::ostream& out) {
    out << header_line(c) << '\n';
    write_examples(out, examples);
  });
  return 0;
}

int run_retrieve(const RunConfig& c) {
  require(c.out, "--out");
  auto e = load_engine(c, true);
  auto trie = DocIdTrie::build(e->corpus, e->vocab);
  auto lm = make_lm(c, *e);
  std::vector<std::string> lines;
  for (const auto& g : e->gold) {
    DecodeSession session(*lm, e->vocab.encode(with_prefix(kRetrievePrefix, g.input)));
    RankedDocIds ranked;
    if (!trie.empty()) {
      if (c.k_retrieve == 0) throw InvalidArgument("--k-retrieve must be at least 1");
      ranked = decode_docid_list(session, trie, c.k_retrieve);
    }
    json rec = {{"query_id", g.query_id},
                {"docids", ranked.docids},
                {"per_docid_logprob", ranked.per_docid_logprob},
                {"references", json::array()},
                {"answer", ""},
                {"cost", cost_json(session.cost())}};
    lines.push_back(rec.dump());
  }
  write_file(c.out, [&](std::ostream& out) {
    out << header_line(c) << '\n';
    for (const auto& l : lines) out << l << '\n';
  });
  return 0;
}

int run_rag(const RunConfig& c) {
  require(c.out, "--out");
  if (c.mode != "continuous" && c.mode != "pipeline") {
    throw InvalidArgument("--mode must be 'continuous' or 'pipeline', got '" + c.mode + "'");
  }
  auto e = load_engine(c, true);
  auto trie = DocIdTrie::build(e->corpus, e->vocab);
  auto lm = make_lm(c, *e);
  auto opts = rag_options(c);
  std::vector<std::string> lines;
  for (const auto& g : e->gold) {
    auto r = c.mode == "continuous" ? generate_rag(*lm, trie, e->corpus, g.input, opts)
                                    : generate_rag_pipeline(*lm, trie, e->corpus, g.input, opts);
    json rec = {{"query_id", g.query_id},
                {"docids", r.docids.docids},
                {"per_docid_logprob", r.docids.per_docid_logprob},
                {"context_docids", r.context_docids},
                {"references", r.references},
                {"answer", r.answer},
                {"empty_retrieval", r.empty_retrieval},
                {"cost", cost_json(r.decode_cost)}};
    lines.push_back(rec.dump());
  }
  write_file(c.out, [&](std::ostream& out) {
    out << header_line(c) << '\n';
    for (const auto& l : lines) out << l << '\n';
  });
  return 0;
}

int run_loss(const RunConfig& c) {
  require(c.out, "--out");
  auto e = load_engine(c, false);
  const auto& batch = c.examples.empty() ? e->train : e->scored;
  auto lm = make_lm(c, *e);
  auto breakdown = combined_loss(*lm, batch, c.lambda, c.tau);
  json doc = {{"run_config", to_json(c)},
              {"examples", batch.size()},
              {"loss",
               {{"l_rank", breakdown.l_rank},
                {"l_gen", breakdown.l_gen},
                {"l_ref", breakdown.l_ref},
                {"l_ans", breakdown.l_ans},
                {"l_rag", breakdown.l_rag},
                {"l_aux", breakdown.l_aux},
                {"combined", breakdown.combined}}}};
  write_json_document(c.out, doc);
  return 0;
}

int run_eval(const RunConfig& c) {
  require(c.pred, "--pred");
  require(c.gold, "--gold");
  require(c.out, "--out");
  auto report = evaluate_run(c.pred, c.gold, parse_category(c.task));
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  json per_query = json::array();
  for (const auto& q : report.per_query) per_query.push_back({{"query_id", q.query_id}, {"metrics", q.metrics}});
  json doc = {{"run_config", to_json(c)},
              {"category", category_name(report.category)},
              {"query_count", report.query_count},
              {"metrics", report.metrics},
              {"warnings", report.warnings},
              {"per_query", per_query}};
  write_json_document(c.out, doc);
  if (!c.per_query.empty()) {
    auto names = category_metrics(report.category);
    write_file(c.per_query, [&](std::ostream& out) {
      out << "query_id";
      for (const auto& n : names) out << '\t' << n;
      out << '\n';
      for (const auto& q : report.per_query) {
        out << q.query_id;
        for (const auto& n : names) out << '\t' << json(q.metrics.at(n)).dump();
        out << '\n';
      }
    });
  }
  return 0;
}

int run_serve_lm(const RunConfig& c) {
  auto e = load_engine(c, false);
  auto lm = make_lm(c, *e);
  ScorerServer server(*lm, c.host, c.port);
  std::cout << server.endpoint() << std::endl;
  server.wait();
  return 0;
}

namespace {

void configure_logging() {
  auto logger = spdlog::get("genret");
  if (!logger) logger = spdlog::stderr_color_mt("genret");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CORPUSLM_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Generative retrieval and retrieval-augmented generation over a DocId trie"};
  app.require_subcommand(1);
  RunConfig c;
  std::string lambda = "1,1,1,1";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--corpus", c.corpus, "Corpus file (one JSON record per line)");
    sub->add_option("--gold", c.gold, "Gold file (one JSON record per line)");
    sub->add_option("--out", c.out, "Output file or directory");
    sub->add_option("--train", c.train, "Training examples used to fit the reference n-gram scorer");
    sub->add_option("--k-retrieve", c.k_retrieve, "DocIds to generate")->capture_default_str();
    sub->add_option("--k-context", c.k_context, "Documents placed in the RAG context")->capture_default_str();
    sub->add_option("--tau", c.tau, "Noise sampling probability")->capture_default_str();
    sub->add_option("--lambda", lambda, "Loss weights r,g,rag,aux")->capture_default_str();
    sub->add_option("--seed", c.seed, "Seed for every random draw")->capture_default_str();
    sub->add_option("--mode", c.mode, "RAG decoding mode: continuous|pipeline")->capture_default_str();
    sub->add_option("--remote-lm", c.remote_lm, "Remote scorer address (host:port)");
    sub->add_option("--remote-timeout", c.remote_timeout_s, "Remote scorer timeout in seconds")
        ->capture_default_str();
    sub->add_option("--bm25-k1", c.bm25.k1, "BM25 k1")->capture_default_str();
    sub->add_option("--bm25-b", c.bm25.b, "BM25 b")->capture_default_str();
    sub->add_option("--budget", c.budget, "Token budget per rendered document")->capture_default_str();
    sub->add_option("--order", c.ngram_order, "n-gram order")->capture_default_str();
    sub->add_option("--alpha", c.alpha, "n-gram smoothing constant")->capture_default_str();
    sub->add_option("--answer-cap", c.answer_cap, "Maximum answer tokens")->capture_default_str();
    sub->add_option("--reference-cap", c.reference_cap, "Maximum tokens per reference")->capture_default_str();
    sub->add_option("--per-task", c.per_task, "Examples per DocId understanding task")->capture_default_str();
    sub->add_option("--candidates", c.candidates, "BM25 candidates passed to the reranker")->capture_default_str();
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"ingest", "Validate a corpus and write its vocabulary and statistics", run_ingest},
      {"index", "Build the DocId trie snapshot and BM25 statistics", run_index},
      {"traindata", "Generate ranking, RAG and DocId understanding examples", run_traindata},
      {"retrieve", "Generate ranked DocId lists for gold queries", run_retrieve},
      {"rag", "Run DocId -> reference -> answer decoding for gold queries", run_rag},
      {"loss", "Evaluate the combined training loss over examples", run_loss},
      {"eval", "Score a prediction file against gold records", run_eval},
      {"serve-lm", "Serve the reference scorer over the remote protocol", run_serve_lm},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub);
    subs.emplace_back(sub, &cmd);
  }
  for (auto& [sub, cmd] : subs) {
    std::string name = cmd->name;
    if (name == "loss") sub->add_option("--examples", c.examples, "Examples to score (default: --train)");
    if (name == "eval") {
      sub->add_option("--pred", c.pred, "Prediction file");
      sub->add_option("--task", c.task, "retrieval|qa|classification|longform|dialogue")->capture_default_str();
      sub->add_option("--per-query", c.per_query, "Optional per-query table (TSV)");
    }
    if (name == "serve-lm") {
      sub->add_option("--host", c.host)->capture_default_str();
      sub->add_option("--port", c.port)->capture_default_str();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    c.lambda = parse_lambda(lambda);
    for (auto& [sub, cmd] : subs) {
      if (sub->parsed()) {
        c.command = cmd->name;
        return cmd->run(c);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}

}  // namespace genret::cli
