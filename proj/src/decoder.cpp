#include "genret/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "genret/errors.hpp"

namespace genret {
namespace {

double log_sum_exp(const std::vector<double>& logprobs, std::span<const TokenId> allowed) {
  double hi = -std::numeric_limits<double>::infinity();
  for (auto t : allowed) hi = std::max(hi, logprobs[t]);
  double acc = 0;
  for (auto t : allowed) acc += std::exp(logprobs[t] - hi);
  return hi + std::log(acc);
}

// `lead` followed by every non-special id.
std::vector<TokenId> text_mask(TokenId lead, std::size_t vocab_size) {
  std::vector<TokenId> mask;
  mask.reserve(vocab_size > kNumSpecials ? vocab_size - kNumSpecials + 1 : 1);
  mask.push_back(lead);
  for (TokenId t = kNumSpecials; t < vocab_size; ++t) mask.push_back(t);
  return mask;
}

std::pair<TokenId, double> pick_token(const LmScorer& lm, std::span<const TokenId> context,
                                      std::span<const TokenId> allowed, DecodeCost& cost) {
  if (allowed.empty()) throw DeadEnd("no token is allowed at this step");
  if (allowed.size() == 1) return {allowed.front(), 0.0};
  auto lp = lm.next_logprobs(context);
  ++cost.scorer_calls;
  TokenId best = allowed.front();
  for (auto t : allowed) {
    if (lp[t] > lp[best]) best = t;
  }
  return {best, lp[best] - log_sum_exp(lp, allowed)};
}

// Reference segments, one per context document, then the answer segment.
void decode_references_and_answer(DecodeSession& session, std::size_t references, const RagOptions& options,
                                  std::size_t vocab_size, RagResult& out, const Vocabulary& vocab) {
  const auto ref_mask = text_mask(kRefClose, vocab_size);
  for (std::size_t r = 0; r < references; ++r) {
    session.append(kRefOpen);
    std::vector<TokenId> content;
    while (true) {
      if (content.size() == options.reference_cap) {
        session.append(kRefClose);
        break;
      }
      auto [tok, lp] = session.choose(ref_mask);
      if (tok == kRefClose) break;
      content.push_back(tok);
    }
    out.references.push_back(vocab.decode(content));
  }
  const auto answer_mask = text_mask(kEos, vocab_size);
  session.append(kAnswerOpen);
  std::vector<TokenId> answer;
  while (true) {
    if (answer.size() == options.answer_cap) {
      session.append(kEos);
      break;
    }
    auto [tok, lp] = session.choose(answer_mask);
    if (tok == kEos) break;
    answer.push_back(tok);
  }
  out.answer = vocab.decode(answer);
}

void check_rag_options(const RagOptions& options) {
  if (options.k_context < 1 || options.k_retrieve < options.k_context) {
    throw InvalidArgument("RAG decoding needs k_retrieve >= k_context >= 1");
  }
}

std::vector<TokenId> rag_prompt(const Vocabulary& vocab, std::string_view query) {
  return vocab.encode(with_prefix(kRagPrefix, query));
}

void inject_documents(DecodeSession& session, const Corpus& corpus, const Vocabulary& vocab,
                      std::span<const DocId> ids, std::size_t budget) {
  for (const auto& id : ids) session.inject(vocab.encode(render_document(corpus.get(id), budget)));
}

}  // namespace

DecodeSession::DecodeSession(const LmScorer& lm, std::vector<TokenId> prompt)
    : lm_(&lm), context_(std::move(prompt)), prompt_size_(context_.size()) {
  cost_.context_tokens = context_.size();
}

std::pair<TokenId, double> DecodeSession::pick(std::span<const TokenId> allowed) {
  return pick_token(*lm_, context_, allowed, cost_);
}

std::pair<TokenId, double> DecodeSession::choose(std::span<const TokenId> allowed) {
  auto chosen = pick(allowed);
  append(chosen.first);
  return chosen;
}

void DecodeSession::append(TokenId token) {
  context_.push_back(token);
  ++cost_.context_tokens;
}

void DecodeSession::inject(std::span<const TokenId> tokens) {
  context_.insert(context_.end(), tokens.begin(), tokens.end());
  cost_.context_tokens += tokens.size();
}

RankedDocIds decode_docid_list(DecodeSession& session, const DocIdTrie& trie, std::size_t k) {
  const auto vocab_size = session.lm().vocab_size();
  ExclusionSet excl(trie);
  ConstraintState state;
  RankedDocIds out;
  double span_logprob = 0;
  while (out.docids.size() < k) {
    auto mask = allowed_mask(state, trie, excl, DecodePhase::kDocIdList, vocab_size);
    if (!state.inside() && mask.front() != kDocIdOpen) break;  // every DocId already generated
    auto [tok, lp] = session.pick(mask);
    if (tok == kEos) break;
    session.append(tok);
    span_logprob += lp;
    if (tok == kDocIdClose) {
      auto node = trie.walk(state.inner_prefix);
      const auto& id = trie.doc_ids()[static_cast<std::size_t>(trie.terminal_doc(*node))];
      excl.exclude(id);
      out.docids.push_back(id);
      out.per_docid_logprob.push_back(span_logprob);
      span_logprob = 0;
    }
    state = step_state(std::move(state), tok);
  }
  return out;
}

RankedDocIds generate_docid_list(const LmScorer& lm, const DocIdTrie& trie, std::string_view query, std::size_t k) {
  if (k == 0) throw InvalidArgument("DocId list length must be at least 1");
  if (trie.empty()) throw InvalidArgument("cannot generate DocIds from an empty trie");
  DecodeSession session(lm, lm.vocabulary().encode(with_prefix(kRetrievePrefix, query)));
  return decode_docid_list(session, trie, k);
}

std::string generate_closed_book(const LmScorer& lm, std::string_view query, std::size_t max_tokens) {
  if (max_tokens == 0) throw InvalidArgument("closed-book decoding needs max_tokens >= 1");
  auto prompt = lm.vocabulary().encode(with_prefix(kAnswerPrefix, query));
  prompt.push_back(kAnswerOpen);
  DecodeSession session(lm, std::move(prompt));
  const auto mask = text_mask(kEos, lm.vocab_size());
  std::vector<TokenId> answer;
  while (answer.size() < max_tokens) {
    auto [tok, lp] = session.choose(mask);
    if (tok == kEos) break;
    answer.push_back(tok);
  }
  return lm.vocabulary().decode(answer);
}

RagResult generate_rag(const LmScorer& lm, const DocIdTrie& trie, const Corpus& corpus, std::string_view query,
                       const RagOptions& options) {
  check_rag_options(options);
  const auto& vocab = lm.vocabulary();
  DecodeSession session(lm, rag_prompt(vocab, query));
  RagResult out;
  out.docids = decode_docid_list(session, trie, options.k_retrieve);
  auto n = std::min(options.k_context, out.docids.docids.size());
  out.context_docids.assign(out.docids.docids.begin(), out.docids.docids.begin() + static_cast<std::ptrdiff_t>(n));
  out.empty_retrieval = out.context_docids.empty();
  inject_documents(session, corpus, vocab, out.context_docids, options.document_budget);
  decode_references_and_answer(session, n, options, lm.vocab_size(), out, vocab);
  auto ctx = session.context();
  out.token_trace.assign(ctx.begin() + static_cast<std::ptrdiff_t>(session.prompt_size()), ctx.end());
  out.decode_cost = session.cost();
  return out;
}

RagResult generate_rag_pipeline(const LmScorer& lm, const DocIdTrie& trie, const Corpus& corpus,
                                std::string_view query, const RagOptions& options) {
  check_rag_options(options);
  const auto& vocab = lm.vocabulary();
  auto prompt = rag_prompt(vocab, query);
  RagResult out;

  DecodeSession retrieval(lm, prompt);
  out.docids = decode_docid_list(retrieval, trie, options.k_retrieve);
  auto listed = retrieval.context();
  out.token_trace.assign(listed.begin() + static_cast<std::ptrdiff_t>(retrieval.prompt_size()), listed.end());

  auto n = std::min(options.k_context, out.docids.docids.size());
  out.context_docids.assign(out.docids.docids.begin(), out.docids.docids.begin() + static_cast<std::ptrdiff_t>(n));
  out.empty_retrieval = out.context_docids.empty();

  // Second pass re-reads the query and the documents from scratch.
  DecodeSession reader(lm, prompt);
  inject_documents(reader, corpus, vocab, out.context_docids, options.document_budget);
  decode_references_and_answer(reader, n, options, lm.vocab_size(), out, vocab);
  auto ctx = reader.context();
  out.token_trace.insert(out.token_trace.end(), ctx.begin() + static_cast<std::ptrdiff_t>(reader.prompt_size()),
                         ctx.end());
  out.decode_cost = retrieval.cost();
  out.decode_cost += reader.cost();
  return out;
}

double score_sequence(const LmScorer& lm, std::span<const TokenId> context, std::span<const TokenId> target,
                      const MaskProvider& mask) {
  if (target.empty()) throw InvalidArgument("cannot score an empty target");
  const auto v = lm.vocab_size();
  std::vector<TokenId> history(context.begin(), context.end());
  history.reserve(context.size() + target.size());
  double total = 0;
  for (auto t : target) {
    if (t >= v) throw InvalidToken("target token id " + std::to_string(t) + " out of range");
    auto lp = lm.next_logprobs(history);
    if (mask) {
      auto allowed = mask(history);
      if (!std::binary_search(allowed.begin(), allowed.end(), t)) {
        throw InvalidArgument("target token " + std::to_string(t) + " is not allowed by the mask");
      }
      total += lp[t] - log_sum_exp(lp, allowed);
    } else {
      total += lp[t];
    }
    history.push_back(t);
  }
  return total;
}

bool parse_rag_trace(std::span<const TokenId> trace, std::size_t expected_references) {
  std::size_t i = 0;
  const std::size_t n = trace.size();
  auto word = [&](std::size_t j) { return j < n && !is_special(trace[j]); };
  while (i < n && trace[i] == kDocIdOpen) {
    ++i;
    if (!word(i)) return false;
    while (word(i)) ++i;
    if (i >= n || trace[i] != kDocIdClose) return false;
    ++i;
  }
  while (word(i)) ++i;
  for (std::size_t r = 0; r < expected_references; ++r) {
    if (i >= n || trace[i] != kRefOpen) return false;
    ++i;
    while (word(i)) ++i;
    if (i >= n || trace[i] != kRefClose) return false;
    ++i;
  }
  if (i >= n || trace[i] != kAnswerOpen) return false;
  ++i;
  while (word(i)) ++i;
  return i + 1 == n && trace[i] == kEos;
}

}  // namespace genret
