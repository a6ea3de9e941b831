#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "genret/tokenizer.hpp"
#include "genret/vocabulary.hpp"

namespace genret {

inline const double kDefaultLogprobFloor = std::log(1e-12);

// Next-token log-probability provider. Implementations are deterministic,
// read-only after construction, and safe to share between sessions.
class LmScorer {
 public:
  virtual ~LmScorer() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  std::size_t vocab_size() const { return vocabulary().size(); }

  // One finite entry per vocabulary id; exp-sum within 1e-6 of 1. Throws
  // InvalidToken for out-of-range context ids.
  virtual std::vector<double> next_logprobs(std::span<const TokenId> context) const = 0;

 protected:
  void check_context(std::span<const TokenId> context) const;
};

class UniformLm final : public LmScorer {
 public:
  explicit UniformLm(const Vocabulary& vocab) : vocab_(&vocab) {}
  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::vector<double> next_logprobs(std::span<const TokenId> context) const override;

 private:
  const Vocabulary* vocab_;
};

struct NgramOptions {
  std::size_t order = 3;
  double alpha = 0.1;
  double floor = kDefaultLogprobFloor;
};

// Count-based n-gram model with add-alpha smoothing and backoff to the
// longest context suffix that has been seen:
//   P(t | c) = (count(c, t) + alpha) / (count(c) + alpha * V)
// An empty model is uniform.
class NgramLm final : public LmScorer {
 public:
  // Throws InvalidArgument for order 0 or alpha <= 0, InvalidToken for ids
  // outside the vocabulary.
  NgramLm(const Vocabulary& vocab, std::span<const std::vector<TokenId>> texts, const NgramOptions& options = {});

  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::vector<double> next_logprobs(std::span<const TokenId> context) const override;

  std::size_t order() const { return options_.order; }
  double alpha() const { return options_.alpha; }
  // Count of `token` after exactly `context` (0 when unseen).
  std::uint64_t count(std::span<const TokenId> context, TokenId token) const;

 private:
  struct Entry {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> next;
  };
  static std::string key(std::span<const TokenId> context);

  const Vocabulary* vocab_;
  NgramOptions options_;
  std::unordered_map<std::string, Entry> table_;
};

NgramLm train_ngram(const Vocabulary& vocab, std::span<const std::vector<TokenId>> texts,
                    const NgramOptions& options = {});

struct RemoteOptions {
  std::chrono::milliseconds timeout{30'000};
  double floor = kDefaultLogprobFloor;
};

// Scorer backed by a network service speaking
//   request  {"context": [int, ...]}
//   response {"logprobs": [float, ...]}   (exactly V entries)
// over HTTP POST. `endpoint` is "host:port" or "http://host:port[/path]";
// the default path is /logprobs. Failures raise RemoteTimeout (including
// unreachable endpoints), RemoteMalformedResponse, or
// RemoteVocabularyMismatch; there is no fallback.
class RemoteLm final : public LmScorer {
 public:
  RemoteLm(const Vocabulary& vocab, std::string endpoint, const RemoteOptions& options = {});
  ~RemoteLm() override;

  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::vector<double> next_logprobs(std::span<const TokenId> context) const override;

 private:
  const Vocabulary* vocab_;
  std::string host_;
  int port_ = 80;
  std::string path_;
  RemoteOptions options_;
};

std::vector<double> remote_logprobs(const RemoteLm& lm, std::span<const TokenId> context);

// Serves a scorer over the remote protocol. Runs on a background thread
// until destroyed.
class ScorerServer {
 public:
  // port 0 picks a free port.
  ScorerServer(const LmScorer& lm, const std::string& host = "127.0.0.1", int port = 0);
  ~ScorerServer();
  ScorerServer(const ScorerServer&) = delete;
  ScorerServer& operator=(const ScorerServer&) = delete;

  int port() const { return port_; }
  std::string endpoint() const;
  // Blocks until stop() is called from another thread.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_ = 0;
};

}  // namespace genret
