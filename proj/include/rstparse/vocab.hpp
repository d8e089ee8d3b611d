#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rstparse/core.hpp"

namespace rstparse {

// Token vocabulary with a reserved unknown entry at index 0.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary() { add(std::string(kUnkToken)); }

  int add(const std::string& token) {
    auto [it, inserted] = index_.try_emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  int index(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }

  // Rebuilds from a token list whose first entry is the unknown token.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.empty() || tokens.front() != kUnkToken)
      throw std::invalid_argument("vocabulary list must start with " + std::string(kUnkToken));
    Vocabulary v;
    for (std::size_t a = 1; a < tokens.size(); ++a) v.add(tokens[a]);
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

// Relation label set. Index 0 is always LEAF.
class RelationVocab {
 public:
  static constexpr std::string_view kLeafName = "LEAF";

  RelationVocab() { names_.emplace_back(kLeafName); }

  explicit RelationVocab(const std::vector<std::string>& labels) : RelationVocab() {
    for (const auto& l : labels) add(l);
  }

  Relation add(const std::string& name) {
    if (name == kLeafName) throw std::invalid_argument("LEAF is reserved and implicit");
    if (auto r = find(name)) return *r;
    names_.push_back(name);
    return Relation{static_cast<int>(names_.size()) - 1};
  }

  std::optional<Relation> find(std::string_view name) const {
    for (std::size_t a = 0; a < names_.size(); ++a)
      if (names_[a] == name) return Relation{static_cast<int>(a)};
    return std::nullopt;
  }

  const std::string& name(Relation r) const { return names_.at(static_cast<std::size_t>(r.id)); }
  int size() const { return static_cast<int>(names_.size()); }
  // Labels excluding LEAF, in id order.
  std::vector<std::string> labels() const { return {names_.begin() + 1, names_.end()}; }
  bool operator==(const RelationVocab&) const = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace rstparse
