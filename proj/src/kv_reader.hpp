#pragma once

#include <initializer_list>
#include <map>
#include <set>
#include <string>

#include "dcmg/netspec.hpp"

namespace dcmg {

// Keyed access to one document section; rejects duplicate and unknown keys.
class KeyReader {
 public:
  explicit KeyReader(const KvSection& s) : section_(s) {
    for (const auto& e : s.entries) {
      if (!values_.emplace(e.key, &e).second) {
        throw ParseError(e.line, name() + ": duplicate key '" + e.key + "'");
      }
    }
  }

  double number(const std::string& key) {
    const KvEntry* e = find(key);
    return parse_number(e->value, e->line, name() + "." + key);
  }

  std::string text(const std::string& key) { return find(key)->value; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int index(const std::string& key) {
    const KvEntry* e = find(key);
    return parse_index(e->value, e->line, name() + "." + key);
  }

  // Rejects keys outside `known` before any lookup, so a misspelt key is reported at its own line.
  void allow(std::initializer_list<const char*> known) const {
    for (const auto& e : section_.entries) {
      bool ok = false;
      for (const char* k : known) ok = ok || e.key == k;
      if (!ok) throw ParseError(e.line, name() + ": unknown key '" + e.key + "'");
    }
  }

  void finish() const {
    for (const auto& e : section_.entries) {
      if (!used_.count(e.key)) {
        throw ParseError(e.line, name() + ": unknown key '" + e.key + "'");
      }
    }
  }

 private:
  std::string name() const {
    return section_.label.empty() ? section_.kind : section_.kind + " " + section_.label;
  }

  const KvEntry* find(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw ParseError(section_.line, name() + ": missing key '" + key + "'");
    }
    used_.insert(key);
    return it->second;
  }

  const KvSection& section_;
  std::map<std::string, const KvEntry*> values_;
  std::set<std::string> used_;
};

}  // namespace dcmg
