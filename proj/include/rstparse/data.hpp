#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rstparse/autodiff.hpp"
#include "rstparse/core.hpp"
#include "rstparse/model.hpp"
#include "rstparse/vocab.hpp"

namespace rstparse {

enum class DataErrorKind { Syntax, EduCountMismatch, UnknownRelation, InvalidTree, Io };

inline const char* to_string(DataErrorKind k) {
  switch (k) {
    case DataErrorKind::Syntax: return "syntax error";
    case DataErrorKind::EduCountMismatch: return "EDU count mismatch";
    case DataErrorKind::UnknownRelation: return "unknown relation";
    case DataErrorKind::InvalidTree: return "invalid tree";
    case DataErrorKind::Io: return "I/O error";
  }
  return "error";
}

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorKind kind, const std::string& source, int line, int column, const std::string& what)
      : std::runtime_error(format(kind, source, line, column, what)), kind_(kind), line_(line), column_(column) {}

  DataErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(DataErrorKind kind, const std::string& source, int line, int column,
                            const std::string& what) {
    std::string out = source.empty() ? "<input>" : source;
    if (line > 0) out += ":" + std::to_string(line);
    if (column > 0) out += ":" + std::to_string(column);
    return out + ": " + to_string(kind) + ": " + what;
  }

  DataErrorKind kind_;
  int line_, column_;
};

// ---- .edus ------------------------------------------------------------------

inline std::string escape_word(std::string_view w) {
  std::string out;
  for (char c : w) {
    if (c == '_') out += '\\';
    out += c;
  }
  return out;
}

// One EDU per line; tokens are `word_POS` separated by single spaces, with
// `\_` standing for a literal underscore inside the word.
inline std::vector<Edu> parse_edus(std::string_view text, const std::string& source = {}) {
  std::vector<Edu> edus;
  int line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view row = text.substr(pos, end - pos);
    pos = end + 1;
    auto fail = [&](std::size_t col, const std::string& what) {
      throw DataError(DataErrorKind::Syntax, source, line, static_cast<int>(col) + 1, what);
    };
    if (row.empty()) fail(0, "empty EDU line");
    Edu edu;
    edu.index = line;
    std::size_t start = 0;
    while (start <= row.size()) {
      std::size_t stop = row.find(' ', start);
      if (stop == std::string_view::npos) stop = row.size();
      const std::string_view tok = row.substr(start, stop - start);
      if (tok.empty()) fail(start, "empty token");
      std::string word;
      std::size_t sep = std::string_view::npos;
      for (std::size_t c = 0; c < tok.size(); ++c) {
        if (tok[c] == '\\' && c + 1 < tok.size() && tok[c + 1] == '_') {
          word += '_';
          ++c;
        } else if (tok[c] == '_') {
          sep = c;
          break;
        } else {
          word += tok[c];
        }
      }
      if (sep == std::string_view::npos) fail(start, "token without _POS suffix");
      if (word.empty()) fail(start, "empty word");
      if (sep + 1 >= tok.size()) fail(start + sep, "empty POS tag");
      edu.tokens.push_back(std::move(word));
      edu.pos_tags.emplace_back(tok.substr(sep + 1));
      start = stop + 1;
    }
    edus.push_back(std::move(edu));
  }
  return edus;
}

inline std::string serialize_edus(const std::vector<Edu>& edus) {
  std::string out;
  for (const auto& e : edus) {
    for (std::size_t t = 0; t < e.tokens.size(); ++t) {
      if (t) out += ' ';
      out += escape_word(e.tokens[t]);
      out += '_';
      out += e.pos_tags[t];
    }
    out += '\n';
  }
  return out;
}

// ---- .tree ------------------------------------------------------------------

namespace detail {

struct TreeToken {
  enum Kind { Open, Close, Atom, End } kind;
  std::string text;
  int line, column;
};

class TreeLexer {
 public:
  TreeLexer(std::string_view text, const std::string& source) : text_(text), source_(source) {}

  TreeToken next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
    if (pos_ >= text_.size()) return {TreeToken::End, "", line_, col_};
    const int l = line_, c = col_;
    const char ch = text_[pos_];
    if (ch == '(') {
      advance();
      return {TreeToken::Open, "(", l, c};
    }
    if (ch == ')') {
      advance();
      return {TreeToken::Close, ")", l, c};
    }
    std::string atom;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      atom += text_[pos_];
      advance();
    }
    return {TreeToken::Atom, atom, l, c};
  }

  const std::string& source() const { return source_; }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

struct TreeNode {
  bool leaf = false;
  int edu = 0;
  Relation relation;
  Nuclearity nuclearity = Nuclearity::LEAF;
  int line = 0, column = 0;
  std::unique_ptr<TreeNode> left, right;
};

class TreeParser {
 public:
  TreeParser(std::string_view text, RelationVocab& rels, bool extend, const std::string& source)
      : lex_(text, source), rels_(rels), extend_(extend) {
    tok_ = lex_.next();
  }

  std::unique_ptr<TreeNode> parse() {
    auto root = node();
    if (tok_.kind != TreeToken::End) syntax("trailing input after tree");
    return root;
  }

 private:
  [[noreturn]] void syntax(const std::string& what) {
    throw DataError(DataErrorKind::Syntax, lex_.source(), tok_.line, tok_.column, what);
  }

  void expect(TreeToken::Kind kind, const char* what) {
    if (tok_.kind != kind) syntax(std::string("expected ") + what);
    tok_ = lex_.next();
  }

  std::unique_ptr<TreeNode> node() {
    auto n = std::make_unique<TreeNode>();
    n->line = tok_.line;
    n->column = tok_.column;
    expect(TreeToken::Open, "'('");
    if (tok_.kind != TreeToken::Atom) syntax("expected LEAF or a nuclearity label");
    const std::string head = tok_.text;
    if (head == "LEAF") {
      tok_ = lex_.next();
      if (tok_.kind != TreeToken::Atom) syntax("expected EDU index");
      int k = 0;
      const auto& s = tok_.text;
      auto r = std::from_chars(s.data(), s.data() + s.size(), k);
      if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || k < 1) syntax("bad EDU index '" + s + "'");
      n->leaf = true;
      n->edu = k;
      tok_ = lex_.next();
      expect(TreeToken::Close, "')'");
      return n;
    }
    const auto nuc = parse_nuclearity(head);
    if (!nuc || *nuc == Nuclearity::LEAF) syntax("bad nuclearity '" + head + "'");
    n->nuclearity = *nuc;
    tok_ = lex_.next();
    if (tok_.kind != TreeToken::Atom) syntax("expected relation label");
    if (tok_.text == RelationVocab::kLeafName)
      throw DataError(DataErrorKind::InvalidTree, lex_.source(), tok_.line, tok_.column,
                      "internal node labeled LEAF");
    auto rel = rels_.find(tok_.text);
    if (!rel) {
      if (!extend_)
        throw DataError(DataErrorKind::UnknownRelation, lex_.source(), tok_.line, tok_.column,
                        "'" + tok_.text + "' is not declared in the manifest");
      rel = rels_.add(tok_.text);
    }
    n->relation = *rel;
    tok_ = lex_.next();
    n->left = node();
    n->right = node();
    expect(TreeToken::Close, "')'");
    return n;
  }

  TreeLexer lex_;
  RelationVocab& rels_;
  bool extend_;
  TreeToken tok_;
};

inline int max_leaf(const TreeNode& n) {
  return n.leaf ? n.edu : std::max(max_leaf(*n.left), max_leaf(*n.right));
}

// Returns the covered 1-based EDU range.
inline std::pair<int, int> collect_spans(const TreeNode& n, const std::string& source, std::vector<LabeledSpan>& spans,
                                         std::map<Span, int>& splits) {
  if (n.leaf) {
    spans.push_back({n.edu - 1, n.edu, kLeafRelation, Nuclearity::LEAF});
    return {n.edu, n.edu};
  }
  auto [a, b] = collect_spans(*n.left, source, spans, splits);
  auto [c, d] = collect_spans(*n.right, source, spans, splits);
  if (b + 1 != c)
    throw DataError(DataErrorKind::InvalidTree, source, n.line, n.column,
                    "children cover non-adjacent EDUs " + std::to_string(a) + "-" + std::to_string(b) + " and " +
                        std::to_string(c) + "-" + std::to_string(d));
  spans.push_back({a - 1, d, n.relation, n.nuclearity});
  splits[{a - 1, d}] = b;
  return {a, d};
}

inline RstTree build_tree(const TreeNode& root, const std::string& source) {
  std::vector<LabeledSpan> spans;
  std::map<Span, int> splits;
  auto [first, last] = collect_spans(root, source, spans, splits);
  if (first != 1)
    throw DataError(DataErrorKind::InvalidTree, source, root.line, root.column, "tree does not start at EDU 1");
  RstTree t(last, std::move(spans), std::move(splits));
  if (auto err = validate_tree(t)) throw DataError(DataErrorKind::InvalidTree, source, 0, 0, *err);
  return t;
}

inline void write_node(const RstTree& t, const RelationVocab& rels, Span s, std::string& out) {
  if (s.is_leaf()) {
    out += "(LEAF " + std::to_string(s.j) + ")";
    return;
  }
  const auto* node = t.find(s);
  const int k = *t.split(s);
  out += "(";
  out += to_string(node->nuclearity);
  out += " " + rels.name(node->relation) + " ";
  write_node(t, rels, {s.i, k}, out);
  out += " ";
  write_node(t, rels, {k, s.j}, out);
  out += ")";
}

}  // namespace detail

// `(LEAF k)` or `(<NN|NS|SN> <Relation> <child> <child>)`. With `extend`,
// undeclared relations are added to `rels` instead of rejected.
inline RstTree parse_tree(std::string_view text, RelationVocab& rels, bool extend = false,
                          const std::string& source = {}) {
  auto root = detail::TreeParser(text, rels, extend, source).parse();
  return detail::build_tree(*root, source);
}

inline std::string serialize_tree(const RstTree& t, const RelationVocab& rels) {
  if (auto err = validate_tree(t)) throw std::invalid_argument("serialize_tree: " + *err);
  std::string out;
  detail::write_node(t, rels, {0, t.num_edus()}, out);
  out += '\n';
  return out;
}

inline Document parse_document(const std::string& doc_id, std::string_view edus_text, std::string_view tree_text,
                               RelationVocab& rels, bool extend = false) {
  Document doc;
  doc.doc_id = doc_id;
  doc.edus = parse_edus(edus_text, doc_id + ".edus");
  const std::string tree_source = doc_id + ".tree";
  auto root = detail::TreeParser(tree_text, rels, extend, tree_source).parse();
  const int referenced = detail::max_leaf(*root);
  if (referenced != doc.num_edus())
    throw DataError(DataErrorKind::EduCountMismatch, tree_source, 0, 0,
                    "tree references " + std::to_string(referenced) + " EDUs, file has " +
                        std::to_string(doc.num_edus()));
  doc.gold = detail::build_tree(*root, tree_source);
  if (doc.gold->num_edus() != doc.num_edus())
    throw DataError(DataErrorKind::EduCountMismatch, tree_source, 0, 0, "tree and EDU file disagree on length");
  return doc;
}

// ---- manifest -----------------------------------------------------------------

inline RelationVocab parse_manifest(std::string_view text, const std::string& source = "manifest.txt") {
  RelationVocab rels;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string label = line.substr(b, e - b + 1);
    if (label.find_first_of(" \t()") != std::string::npos)
      throw DataError(DataErrorKind::Syntax, source, lineno, static_cast<int>(b) + 1, "label contains whitespace or parentheses");
    if (label == RelationVocab::kLeafName)
      throw DataError(DataErrorKind::Syntax, source, lineno, static_cast<int>(b) + 1, "LEAF is implicit and reserved");
    if (rels.find(label))
      throw DataError(DataErrorKind::Syntax, source, lineno, static_cast<int>(b) + 1, "duplicate label " + label);
    rels.add(label);
  }
  return rels;
}

inline std::string serialize_manifest(const RelationVocab& rels) {
  std::string out;
  for (const auto& l : rels.labels()) out += l + "\n";
  return out;
}

// ---- corpus -------------------------------------------------------------------

struct Corpus {
  RelationVocab relations;
  std::vector<Document> documents;
};

inline constexpr std::string_view kManifestName = "manifest.txt";

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::Io, p.string(), 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError(DataErrorKind::Io, p.string(), 0, 0, "cannot write file");
  out << content;
}

// Reads `manifest.txt` plus every `<id>.edus` with its `<id>.tree`, in doc-id
// order. With `require_trees` unset, documents without a tree load ungolded.
inline Corpus load_corpus(const std::filesystem::path& dir, bool require_trees = true) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(DataErrorKind::Io, dir.string(), 0, 0, "not a directory");
  Corpus c;
  c.relations = parse_manifest(read_file(dir / kManifestName), (dir / kManifestName).string());
  std::vector<fs::path> edus;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".edus") edus.push_back(entry.path());
  std::sort(edus.begin(), edus.end());
  for (const auto& p : edus) {
    const std::string id = p.stem().string();
    const fs::path tree = dir / (id + ".tree");
    if (fs::exists(tree)) {
      Document d = parse_document(id, read_file(p), read_file(tree), c.relations);
      c.documents.push_back(std::move(d));
    } else if (require_trees) {
      throw DataError(DataErrorKind::Io, tree.string(), 0, 0, "missing tree for document " + id);
    } else {
      c.documents.push_back({id, parse_edus(read_file(p), p.string()), std::nullopt});
    }
  }
  return c;
}

inline void write_corpus(const std::filesystem::path& dir, const Corpus& c) {
  std::filesystem::create_directories(dir);
  write_file(dir / kManifestName, serialize_manifest(c.relations));
  for (const auto& d : c.documents) {
    write_file(dir / (d.doc_id + ".edus"), serialize_edus(d.edus));
    if (d.gold) write_file(dir / (d.doc_id + ".tree"), serialize_tree(*d.gold, c.relations));
  }
}

// Word and POS vocabularies in first-occurrence order.
inline std::pair<Vocabulary, Vocabulary> build_vocabularies(const std::vector<Document>& docs) {
  Vocabulary words, tags;
  for (const auto& d : docs)
    for (const auto& e : d.edus)
      for (std::size_t t = 0; t < e.tokens.size(); ++t) {
        words.add(e.tokens[t]);
        tags.add(e.pos_tags[t]);
      }
  return {std::move(words), std::move(tags)};
}

struct Split {
  std::vector<Document> train;
  std::vector<Document> dev;
};

// Seeded uniform sample of `dev_size` documents; both sides keep corpus order.
inline Split split_train_dev(const std::vector<Document>& docs, std::size_t dev_size, std::uint64_t seed) {
  if (dev_size >= docs.size() && !(dev_size == 0 && docs.empty()))
    throw std::invalid_argument("dev size " + std::to_string(dev_size) + " must be smaller than the corpus (" +
                                std::to_string(docs.size()) + " documents)");
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_dev(docs.size(), false);
  for (std::size_t a = 0; a < dev_size; ++a) is_dev[order[a]] = true;
  Split s;
  for (std::size_t a = 0; a < docs.size(); ++a) (is_dev[a] ? s.dev : s.train).push_back(docs[a]);
  return s;
}

// ---- pretrained embeddings ------------------------------------------------------

struct EmbeddingTable {
  Parameter table;  // vocabulary-sized, frozen; rows absent from the file are zero
  std::size_t dim = 0;
  int covered = 0;  // vocabulary tokens (excluding <unk>) found in the file
  int vocabulary = 0;

  double coverage() const { return vocabulary ? static_cast<double>(covered) / vocabulary : 0.0; }
};

// GloVe-style text: `token v1 ... vD` per line, D fixed by the first line.
inline EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, const std::string& source = {}) {
  EmbeddingTable out;
  out.vocabulary = vocab.size() - 1;
  std::vector<bool> seen(static_cast<std::size_t>(vocab.size()), false);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> values;
    std::string field;
    while (ls >> field) {
      double v = 0.0;
      auto r = std::from_chars(field.data(), field.data() + field.size(), v);
      if (r.ec != std::errc{} || r.ptr != field.data() + field.size())
        throw DataError(DataErrorKind::Syntax, source, lineno, 0, "unparseable value '" + field + "'");
      values.push_back(v);
    }
    if (values.empty()) throw DataError(DataErrorKind::Syntax, source, lineno, 0, "line has no vector");
    if (out.dim == 0) {
      out.dim = values.size();
      out.table = Parameter("pretrained", static_cast<std::size_t>(vocab.size()), out.dim, false);
    } else if (values.size() != out.dim) {
      throw DataError(DataErrorKind::Syntax, source, lineno, 0,
                      "expected " + std::to_string(out.dim) + " values, found " + std::to_string(values.size()));
    }
    if (token == Vocabulary::kUnkToken || !vocab.contains(token)) continue;
    const auto row = static_cast<std::size_t>(vocab.index(token));
    if (seen[row]) continue;
    seen[row] = true;
    ++out.covered;
    std::copy(values.begin(), values.end(), out.table.value.begin() + static_cast<std::ptrdiff_t>(row * out.dim));
  }
  return out;
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::Io, path.string(), 0, 0, "cannot open embeddings");
  return load_embeddings(in, vocab, path.string());
}

// ---- synthetic corpora ----------------------------------------------------------

namespace detail {

inline void random_subtree(int i, int j, int num_relations, Rng& rng, std::vector<LabeledSpan>& spans,
                           std::map<Span, int>& splits) {
  if (j == i + 1) {
    spans.push_back({i, j, kLeafRelation, Nuclearity::LEAF});
    return;
  }
  const int k = std::uniform_int_distribution<int>(i + 1, j - 1)(rng);
  const int l = std::uniform_int_distribution<int>(1, num_relations - 1)(rng);
  const int p = std::uniform_int_distribution<int>(0, kNumInternalNuclearity - 1)(rng);
  spans.push_back({i, j, Relation{l}, static_cast<Nuclearity>(p)});
  splits[{i, j}] = k;
  random_subtree(i, k, num_relations, rng, spans, splits);
  random_subtree(k, j, num_relations, rng, spans, splits);
}

}  // namespace detail

// Random binary tree over n EDUs (split uniform within each span) with
// uniformly drawn internal labels.
inline RstTree random_tree(int n, int num_relations, Rng& rng) {
  if (n < 1 || num_relations < 2) throw std::invalid_argument("random_tree: need n >= 1 and a non-leaf relation");
  std::vector<LabeledSpan> spans;
  std::map<Span, int> splits;
  detail::random_subtree(0, n, num_relations, rng, spans, splits);
  return RstTree(n, std::move(spans), std::move(splits));
}

struct SyntheticOptions {
  int word_types = 50;
  int tag_types = 8;
  int max_tokens = 4;
};

inline Corpus generate_synthetic(int n_docs, int max_edus, const RelationVocab& rels, std::uint64_t seed,
                                 const SyntheticOptions& opt = {}) {
  if (max_edus < 1) throw std::invalid_argument("generate_synthetic: max_edus must be >= 1");
  if (rels.size() < 2) throw std::invalid_argument("generate_synthetic: need at least one relation");
  Rng rng(derive_seed(seed, "synthetic"));
  Corpus c{rels, {}};
  std::uniform_int_distribution<int> edus(1, max_edus), words(0, opt.word_types - 1), tags(0, opt.tag_types - 1),
      len(1, opt.max_tokens);
  for (int d = 0; d < n_docs; ++d) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "doc%04d", d);
    doc.doc_id = id;
    const int n = edus(rng);
    for (int e = 1; e <= n; ++e) {
      Edu edu;
      edu.index = e;
      const int m = len(rng);
      for (int t = 0; t < m; ++t) {
        edu.tokens.push_back("w" + std::to_string(words(rng)));
        edu.pos_tags.push_back("T" + std::to_string(tags(rng)));
      }
      doc.edus.push_back(std::move(edu));
    }
    doc.gold = random_tree(n, rels.size(), rng);
    c.documents.push_back(std::move(doc));
  }
  return c;
}

}  // namespace rstparse
