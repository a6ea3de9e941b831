#include "genret/corpus.hpp"

#include <sqlite3.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <unordered_map>

#include "genret/errors.hpp"
#include "genret/tokenizer.hpp"
#include "json.hpp"

namespace genret {

using json = nlohmann::json;

DocId canonical_docid(std::string_view title, std::string_view section) {
  auto t = collapse_whitespace(title);
  if (t.empty()) throw InvalidDocument("document title is empty");
  std::string raw = t;
  raw += " # ";
  raw += section;
  return collapse_whitespace(raw);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto flush = [&](std::size_t begin, std::size_t end) {
    auto s = collapse_whitespace(text.substr(begin, end - begin));
    if (!s.empty()) out.push_back(std::move(s));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (!boundary) continue;
    flush(start, i + 1);
    start = i + 1;
  }
  if (start < text.size()) flush(start, text.size());
  return out;
}

Document make_document(std::string_view title, std::string_view section, std::string_view body) {
  Document d;
  d.doc_id = canonical_docid(title, section);
  d.title = collapse_whitespace(title);
  d.section = collapse_whitespace(section);
  d.body = std::string(body);
  d.sentences = split_sentences(body);
  return d;
}

namespace {

class MemoryStore final : public DocumentStore {
 public:
  void put(const Document& doc) override { docs_.emplace(doc.doc_id, doc); }
  std::optional<Document> find(std::string_view doc_id) const override {
    auto it = docs_.find(std::string(doc_id));
    if (it == docs_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view doc_id) const override { return docs_.count(std::string(doc_id)) > 0; }
  bool on_disk() const override { return false; }

 private:
  std::unordered_map<DocId, Document> docs_;
};

class SqliteStore final : public DocumentStore {
 public:
  explicit SqliteStore(const std::filesystem::path& path) {
    if (path.empty()) {
      static std::atomic<int> counter{0};
      path_ = std::filesystem::temp_directory_path() /
              ("genret-docstore-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".sqlite");
      temporary_ = true;
      std::filesystem::remove(path_);
    } else {
      path_ = path;
    }
    int rc = sqlite3_open_v2(path_.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                             nullptr);
    if (rc != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw Error("cannot open document store " + path_.string() + ": " + msg);
    }
    exec("PRAGMA journal_mode=OFF; PRAGMA synchronous=OFF;");
    exec("DROP TABLE IF EXISTS docs;");
    exec("CREATE TABLE docs (id TEXT PRIMARY KEY, title TEXT, section TEXT, body TEXT);");
  }

  ~SqliteStore() override {
    sqlite3_close(db_);
    if (temporary_) {
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }

  void put(const Document& doc) override {
    sqlite3_stmt* stmt = prepare("INSERT INTO docs (id, title, section, body) VALUES (?, ?, ?, ?);");
    bind(stmt, 1, doc.doc_id);
    bind(stmt, 2, doc.title);
    bind(stmt, 3, doc.section);
    bind(stmt, 4, doc.body);
    int rc = sqlite3_step(stmt);
    sqlite3_finalize(stmt);
    if (rc != SQLITE_DONE) throw Error(std::string("document store insert failed: ") + sqlite3_errmsg(db_));
  }

  std::optional<Document> find(std::string_view doc_id) const override {
    sqlite3_stmt* stmt = prepare("SELECT title, section, body FROM docs WHERE id = ?;");
    bind(stmt, 1, doc_id);
    std::optional<Document> out;
    if (sqlite3_step(stmt) == SQLITE_ROW) {
      Document d;
      d.doc_id = std::string(doc_id);
      d.title = column(stmt, 0);
      d.section = column(stmt, 1);
      d.body = column(stmt, 2);
      d.sentences = split_sentences(d.body);
      out = std::move(d);
    }
    sqlite3_finalize(stmt);
    return out;
  }

  bool contains(std::string_view doc_id) const override {
    sqlite3_stmt* stmt = prepare("SELECT 1 FROM docs WHERE id = ?;");
    bind(stmt, 1, doc_id);
    bool found = sqlite3_step(stmt) == SQLITE_ROW;
    sqlite3_finalize(stmt);
    return found;
  }

  bool on_disk() const override { return true; }

 private:
  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw Error("document store: " + msg);
    }
  }
  sqlite3_stmt* prepare(const char* sql) const {
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db_, sql, -1, &stmt, nullptr) != SQLITE_OK) {
      throw Error(std::string("document store: ") + sqlite3_errmsg(db_));
    }
    return stmt;
  }
  static void bind(sqlite3_stmt* stmt, int index, std::string_view value) {
    sqlite3_bind_text(stmt, index, value.data(), static_cast<int>(value.size()), SQLITE_TRANSIENT);
  }
  static std::string column(sqlite3_stmt* stmt, int index) {
    auto* text = sqlite3_column_text(stmt, index);
    return text ? std::string(reinterpret_cast<const char*>(text), sqlite3_column_bytes(stmt, index)) : std::string();
  }

  sqlite3* db_ = nullptr;
  std::filesystem::path path_;
  bool temporary_ = false;
};

std::string describe(const std::string& source_id, std::size_t line) {
  std::string s = "record";
  if (!source_id.empty()) s += " id='" + source_id + "'";
  if (line > 0) s += " (line " + std::to_string(line) + ")";
  return s;
}

}  // namespace

std::unique_ptr<DocumentStore> make_memory_store() { return std::make_unique<MemoryStore>(); }

std::unique_ptr<DocumentStore> make_sqlite_store(const std::filesystem::path& path) {
  return std::make_unique<SqliteStore>(path);
}

// Accumulates documents, switching to the on-disk store once the
// configured threshold is crossed.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(const IngestOptions& options) : options_(options), store_(make_memory_store()) {}

  void add(Document doc, const std::string& source_id, std::size_t line) {
    auto [it, inserted] = origins_.emplace(doc.doc_id, std::make_pair(source_id, line));
    if (!inserted) {
      throw ConflictError("duplicate DocId '" + doc.doc_id + "': " + describe(it->second.first, it->second.second) +
                          " and " + describe(source_id, line));
    }
    if (!store_->on_disk() && ids_.size() + 1 > options_.on_disk_threshold) spill();
    stats_.token_count += word_tokens(doc.body).size();
    stats_.document_count += 1;
    ids_.push_back(doc.doc_id);
    store_->put(doc);
  }

  Corpus finish() {
    Corpus c;
    c.store_ = std::move(store_);
    c.ids_ = std::move(ids_);
    c.stats_ = stats_;
    return c;
  }

 private:
  void spill() {
    auto disk = make_sqlite_store(options_.store_path);
    for (const auto& id : ids_) disk->put(*store_->find(id));
    store_ = std::move(disk);
  }

  IngestOptions options_;
  std::unique_ptr<DocumentStore> store_;
  std::vector<DocId> ids_;
  std::unordered_map<DocId, std::pair<std::string, std::size_t>> origins_;
  CorpusStats stats_;
};

Corpus::Corpus() : store_(make_memory_store()) {}
Corpus::Corpus(Corpus&&) noexcept = default;
Corpus& Corpus::operator=(Corpus&&) noexcept = default;
Corpus::~Corpus() = default;

Corpus Corpus::from_documents(std::vector<Document> docs, const IngestOptions& options) {
  CorpusBuilder builder(options);
  std::size_t index = 0;
  for (auto& d : docs) {
    builder.add(std::move(d), "#" + std::to_string(index), 0);
    ++index;
  }
  return builder.finish();
}

bool Corpus::on_disk() const { return store_->on_disk(); }

bool Corpus::contains(std::string_view doc_id) const { return store_->contains(doc_id); }

Document Corpus::get(std::string_view doc_id) const {
  auto d = store_->find(doc_id);
  if (!d) throw NotFound("unknown DocId '" + std::string(doc_id) + "'");
  return std::move(*d);
}

void Corpus::for_each(const std::function<void(const Document&)>& fn) const {
  for (const auto& id : ids_) fn(get(id));
}

namespace {

std::string string_field(const json& obj, const char* key, std::size_t line, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (!required) return {};
    throw ParseError(line, std::string("missing field '") + key + "'");
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  if (it->is_null() && !required) return {};
  throw ParseError(line, std::string("field '") + key + "' is not a string");
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

Corpus ingest_corpus_stream(std::istream& in, const IngestOptions& options) {
  CorpusBuilder builder(options);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "record is not an object");
    auto id = string_field(rec, "id", line_no);
    auto title = string_field(rec, "title", line_no);
    auto section = string_field(rec, "section", line_no);
    auto text = string_field(rec, "text", line_no);
    Document doc;
    try {
      doc = make_document(title, section, text);
    } catch (const InvalidDocument& e) {
      throw ParseError(line_no, e.what());
    }
    builder.add(std::move(doc), id, line_no);
  }
  return builder.finish();
}

Corpus ingest_corpus(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open corpus file " + path.string());
  return ingest_corpus_stream(in, options);
}

std::vector<GoldRecord> load_gold_stream(std::istream& in) {
  std::vector<GoldRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line_no, "record is not an object");
    if (rec.contains("run_config")) continue;
    GoldRecord g;
    g.query_id = string_field(rec, "id", line_no);
    g.input = string_field(rec, "input", line_no);
    auto outputs = rec.find("output");
    if (outputs != rec.end()) {
      if (!outputs->is_array()) throw ParseError(line_no, "field 'output' is not a list");
      for (const auto& o : *outputs) {
        if (!o.is_object()) throw ParseError(line_no, "output entry is not an object");
        if (auto a = o.find("answer"); a != o.end() && a->is_string()) g.answers.push_back(a->get<std::string>());
        auto prov = o.find("provenance");
        if (prov == o.end() || !prov->is_array() || prov->empty()) continue;
        std::vector<DocId> group;
        for (const auto& p : *prov) {
          if (!p.is_object()) throw ParseError(line_no, "provenance entry is not an object");
          DocId id;
          try {
            id = canonical_docid(string_field(p, "title", line_no), string_field(p, "section", line_no, false));
          } catch (const InvalidDocument& e) {
            throw ParseError(line_no, e.what());
          }
          if (std::find(group.begin(), group.end(), id) == group.end()) group.push_back(id);
          if (std::find(g.provenance.begin(), g.provenance.end(), id) == g.provenance.end()) g.provenance.push_back(id);
        }
        g.provenance_groups.push_back(std::move(group));
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldRecord> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open gold file " + path.string());
  return load_gold_stream(in);
}

}  // namespace genret
