#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genret/bm25.hpp"
#include "genret/training.hpp"
#include "json.hpp"

namespace genret::cli {

// Effective settings of one command invocation. Echoed into every artifact
// the command writes.
struct RunConfig {
  std::string command;
  std::string corpus;
  std::string gold;
  std::string out;
  std::string train;
  std::string examples;
  std::string pred;
  std::string per_query;
  std::string task = "retrieval";
  std::string mode = "continuous";
  std::string remote_lm;
  std::size_t k_retrieve = 10;
  std::size_t k_context = 3;
  double tau = 0.2;
  LossWeights lambda;
  std::size_t ngram_order = 3;
  double alpha = 0.1;
  Bm25Params bm25;
  std::size_t budget = 256;
  std::size_t answer_cap = 64;
  std::size_t reference_cap = 64;
  std::size_t per_task = 100;
  std::size_t candidates = 100;
  std::uint64_t seed = 0;
  std::string host = "127.0.0.1";
  int port = 0;
  double remote_timeout_s = 30;
};

nlohmann::json to_json(const RunConfig& config);

// Parses "r,g,rag,aux". Throws InvalidArgument.
LossWeights parse_lambda(const std::string& text);

int run_ingest(const RunConfig& config);
int run_index(const RunConfig& config);
int run_traindata(const RunConfig& config);
int run_retrieve(const RunConfig& config);
int run_rag(const RunConfig& config);
int run_loss(const RunConfig& config);
int run_eval(const RunConfig& config);
int run_serve_lm(const RunConfig& config);

// Full command line entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace genret::cli
