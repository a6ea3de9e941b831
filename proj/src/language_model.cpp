#include "genret/language_model.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <thread>

#include "genret/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace genret {

using json = nlohmann::json;

void LmScorer::check_context(std::span<const TokenId> context) const {
  auto v = vocab_size();
  for (auto t : context) {
    if (t >= v) throw InvalidToken("context token id " + std::to_string(t) + " out of range (vocabulary size " +
                                   std::to_string(v) + ")");
  }
}

std::vector<double> UniformLm::next_logprobs(std::span<const TokenId> context) const {
  check_context(context);
  auto v = vocab_size();
  return std::vector<double>(v, -std::log(static_cast<double>(v)));
}

NgramLm::NgramLm(const Vocabulary& vocab, std::span<const std::vector<TokenId>> texts, const NgramOptions& options)
    : vocab_(&vocab), options_(options) {
  if (vocab.size() == 0) throw InvalidArgument("n-gram model needs a non-empty vocabulary");
  if (options.order < 1) throw InvalidArgument("n-gram order must be at least 1");
  if (!(options.alpha > 0)) throw InvalidArgument("smoothing constant must be positive");
  for (const auto& text : texts) {
    check_context(text);
    for (std::size_t i = 0; i < text.size(); ++i) {
      // Every context suffix of length 0..order-1 ending before i.
      std::size_t max_ctx = std::min(options.order - 1, i);
      for (std::size_t k = 0; k <= max_ctx; ++k) {
        auto& e = table_[key(std::span<const TokenId>(text).subspan(i - k, k))];
        e.total += 1;
        e.next[text[i]] += 1;
      }
    }
  }
}

std::string NgramLm::key(std::span<const TokenId> context) {
  std::string k(context.size() * sizeof(TokenId), '\0');
  if (!context.empty()) std::memcpy(k.data(), context.data(), k.size());
  return k;
}

std::uint64_t NgramLm::count(std::span<const TokenId> context, TokenId token) const {
  auto it = table_.find(key(context));
  if (it == table_.end()) return 0;
  auto jt = it->second.next.find(token);
  return jt == it->second.next.end() ? 0 : jt->second;
}

std::vector<double> NgramLm::next_logprobs(std::span<const TokenId> context) const {
  check_context(context);
  const auto v = vocab_size();
  const double alpha = options_.alpha;
  std::size_t k = std::min(options_.order - 1, context.size());
  const Entry* entry = nullptr;
  for (;; --k) {
    auto it = table_.find(key(context.subspan(context.size() - k, k)));
    if (it != table_.end() && it->second.total > 0) {
      entry = &it->second;
      break;
    }
    if (k == 0) break;
  }
  if (!entry) return std::vector<double>(v, std::max(-std::log(static_cast<double>(v)), options_.floor));

  const double denom = static_cast<double>(entry->total) + alpha * static_cast<double>(v);
  const double base = std::max(std::log(alpha / denom), options_.floor);
  std::vector<double> out(v, base);
  for (const auto& [tok, c] : entry->next) {
    out[tok] = std::max(std::log((static_cast<double>(c) + alpha) / denom), options_.floor);
  }
  return out;
}

NgramLm train_ngram(const Vocabulary& vocab, std::span<const std::vector<TokenId>> texts,
                    const NgramOptions& options) {
  return NgramLm(vocab, texts, options);
}

namespace {

struct ParsedEndpoint {
  std::string host;
  int port = 80;
  std::string path = "/logprobs";
};

ParsedEndpoint parse_endpoint(std::string endpoint) {
  ParsedEndpoint p;
  if (auto scheme = endpoint.find("://"); scheme != std::string::npos) {
    if (endpoint.substr(0, scheme) != "http") throw InvalidArgument("unsupported scheme in endpoint " + endpoint);
    endpoint = endpoint.substr(scheme + 3);
  }
  if (auto slash = endpoint.find('/'); slash != std::string::npos) {
    p.path = endpoint.substr(slash);
    endpoint = endpoint.substr(0, slash);
  }
  if (auto colon = endpoint.rfind(':'); colon != std::string::npos) {
    try {
      p.port = std::stoi(endpoint.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("invalid port in endpoint " + endpoint);
    }
    endpoint = endpoint.substr(0, colon);
  }
  if (endpoint.empty()) throw InvalidArgument("endpoint has no host");
  p.host = endpoint;
  return p;
}

}  // namespace

RemoteLm::RemoteLm(const Vocabulary& vocab, std::string endpoint, const RemoteOptions& options)
    : vocab_(&vocab), options_(options) {
  auto p = parse_endpoint(std::move(endpoint));
  host_ = p.host;
  port_ = p.port;
  path_ = p.path;
}

RemoteLm::~RemoteLm() = default;

std::vector<double> RemoteLm::next_logprobs(std::span<const TokenId> context) const {
  check_context(context);
  httplib::Client client(host_, port_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  json request = {{"context", std::vector<TokenId>(context.begin(), context.end())}};
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw RemoteTimeout("remote scorer " + host_ + ":" + std::to_string(port_) +
                        " did not answer: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw RemoteMalformedResponse("remote scorer returned HTTP " + std::to_string(res->status));
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw RemoteMalformedResponse(std::string("remote scorer response is not JSON: ") + e.what());
  }
  auto it = body.find("logprobs");
  if (!body.is_object() || it == body.end() || !it->is_array()) {
    throw RemoteMalformedResponse("remote scorer response has no 'logprobs' list");
  }
  if (it->size() != vocab_size()) {
    throw RemoteVocabularyMismatch("remote scorer returned " + std::to_string(it->size()) +
                                   " log-probabilities, local vocabulary has " + std::to_string(vocab_size()));
  }
  std::vector<double> out;
  out.reserve(it->size());
  double mass = 0;
  for (const auto& x : *it) {
    if (!x.is_number()) throw RemoteMalformedResponse("non-numeric log-probability in remote response");
    double lp = x.get<double>();
    if (std::isnan(lp) || lp > 0) throw RemoteMalformedResponse("invalid log-probability in remote response");
    mass += std::exp(lp);
    out.push_back(std::max(lp, options_.floor));
  }
  if (std::abs(mass - 1.0) > 1e-6) {
    throw RemoteMalformedResponse("remote log-probabilities sum to " + std::to_string(mass) + " in probability space");
  }
  return out;
}

std::vector<double> remote_logprobs(const RemoteLm& lm, std::span<const TokenId> context) {
  return lm.next_logprobs(context);
}

struct ScorerServer::Impl {
  httplib::Server server;
  std::thread thread;
};

ScorerServer::ScorerServer(const LmScorer& lm, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()), host_(host) {
  impl_->server.Post(".*", [&lm](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = json::parse(req.body);
      auto context = body.at("context").get<std::vector<TokenId>>();
      json reply = {{"logprobs", lm.next_logprobs(context)}};
      res.set_content(reply.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw Error("cannot bind scorer server to " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

ScorerServer::~ScorerServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string ScorerServer::endpoint() const { return host_ + ":" + std::to_string(port_); }

void ScorerServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void ScorerServer::stop() { impl_->server.stop(); }

}  // namespace genret
