#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace genret {

using DocId = std::string;

struct Document {
  DocId doc_id;
  std::string title;
  std::string section;
  std::string body;
  std::vector<std::string> sentences;
};

// "{title} # {section}" with whitespace collapsed. Throws InvalidDocument on
// an empty title.
DocId canonical_docid(std::string_view title, std::string_view section);

// Splits on '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view text);

Document make_document(std::string_view title, std::string_view section, std::string_view body);

struct CorpusStats {
  std::size_t document_count = 0;
  std::size_t token_count = 0;
};

// Backing map from DocId to Document.
class DocumentStore {
 public:
  virtual ~DocumentStore() = default;
  virtual void put(const Document& doc) = 0;
  virtual std::optional<Document> find(std::string_view doc_id) const = 0;
  virtual bool contains(std::string_view doc_id) const = 0;
  virtual bool on_disk() const = 0;
};

std::unique_ptr<DocumentStore> make_memory_store();
// SQLite file at `path`. An empty path creates a temporary file that is
// removed with the store.
std::unique_ptr<DocumentStore> make_sqlite_store(const std::filesystem::path& path);

struct IngestOptions {
  // Corpora larger than this are kept in an on-disk store.
  std::size_t on_disk_threshold = 1'000'000;
  std::filesystem::path store_path;
};

// Immutable after construction; safe for concurrent readers.
class Corpus {
 public:
  Corpus();
  Corpus(Corpus&&) noexcept;
  Corpus& operator=(Corpus&&) noexcept;
  ~Corpus();

  // Throws ConflictError on duplicate DocIds.
  static Corpus from_documents(std::vector<Document> docs, const IngestOptions& options = {});

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const CorpusStats& stats() const { return stats_; }
  bool on_disk() const;

  bool contains(std::string_view doc_id) const;
  // Throws NotFound for unknown ids.
  Document get(std::string_view doc_id) const;

  // DocIds in ingestion order.
  const std::vector<DocId>& doc_ids() const { return ids_; }
  void for_each(const std::function<void(const Document&)>& fn) const;

 private:
  friend class CorpusBuilder;
  std::unique_ptr<DocumentStore> store_;
  std::vector<DocId> ids_;
  CorpusStats stats_;
};

// Reads the line-delimited corpus format ({"id","title","section","text"}
// per line). Throws ParseError with a 1-based line number on malformed
// input and ConflictError naming both records on duplicate DocIds.
Corpus ingest_corpus(const std::filesystem::path& path, const IngestOptions& options = {});
Corpus ingest_corpus_stream(std::istream& in, const IngestOptions& options = {});

struct GoldRecord {
  std::string query_id;
  std::string input;
  std::vector<std::string> answers;
  // Distinct DocIds over all groups, first-seen order.
  std::vector<DocId> provenance;
  // One group per gold output entry that carries provenance.
  std::vector<std::vector<DocId>> provenance_groups;
};

// Reads the line-delimited gold format ({"id","input","output":[{"answer",
// "provenance":[{"title","section"}]}]}). Lines that carry a top-level
// "run_config" key are skipped.
std::vector<GoldRecord> load_gold(const std::filesystem::path& path);
std::vector<GoldRecord> load_gold_stream(std::istream& in);

}  // namespace genret
