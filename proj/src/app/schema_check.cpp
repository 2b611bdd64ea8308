#include "dk/app/schema_check.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <sstream>

namespace dk::app {

using nlohmann::json;

std::string escape_pointer_token(std::string_view token) {
  std::string out;
  for (char ch : token) {
    if (ch == '~') out += "~0";
    else if (ch == '/') out += "~1";
    else out += ch;
  }
  return out;
}

namespace {

// Walks text that has already been accepted by the JSON parser; it only
// tracks positions, never values.
class Scanner {
 public:
  Scanner(std::string_view text, std::map<std::string, int>& out) : s_(text), out_(out) {}

  void value(const std::string& ptr) {
    skip_ws();
    if (i_ >= s_.size()) return;
    out_.emplace(ptr, line_);
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      skip_ws();
      if (peek() == '}') { ++i_; return; }
      while (i_ < s_.size()) {
        skip_ws();
        const int key_line = line_;
        const std::string key = string();
        const std::string child = ptr + "/" + escape_pointer_token(key);
        out_.emplace(child, key_line);
        skip_ws();
        if (peek() == ':') ++i_;
        value(child);
        skip_ws();
        if (peek() == ',') { ++i_; continue; }
        if (peek() == '}') ++i_;
        return;
      }
    } else if (c == '[') {
      ++i_;
      skip_ws();
      if (peek() == ']') { ++i_; return; }
      for (std::size_t k = 0; i_ < s_.size(); ++k) {
        value(ptr + "/" + std::to_string(k));
        skip_ws();
        if (peek() == ',') { ++i_; continue; }
        if (peek() == ']') ++i_;
        return;
      }
    } else if (c == '"') {
      string();
    } else {
      while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != ',' &&
             s_[i_] != '}' && s_[i_] != ']')
        ++i_;
    }
  }

 private:
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }

  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }

  // Raw key text with escapes decoded only for the common cases; keys in
  // configs are plain identifiers.
  std::string string() {
    std::string out;
    if (peek() != '"') return out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
        ++i_;
        switch (s_[i_]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'u': out += "\\u"; break;
          default: out += s_[i_];
        }
      } else {
        out += s_[i_];
      }
      ++i_;
    }
    ++i_;
    return out;
  }

  std::string_view s_;
  std::map<std::string, int>& out_;
  std::size_t i_ = 0;
  int line_ = 1;
};

std::string type_name(const json& v) {
  switch (v.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    case json::value_t::number_float: return "number";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "object";
    default: return "value";
  }
}

bool has_type(const json& v, const std::string& t) {
  if (t == "number") return v.is_number();
  if (t == "integer") {
    if (v.is_number_integer()) return true;
    if (!v.is_number_float()) return false;
    const double d = v.get<double>();
    return std::isfinite(d) && d == std::floor(d);
  }
  if (t == "string") return v.is_string();
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

std::string brief(const json& v) {
  std::string s = v.dump();
  if (s.size() > 40) s = s.substr(0, 37) + "...";
  return s;
}

class Checker {
 public:
  Checker(const json& root, const LineMap& lines) : root_(root), lines_(lines) {}

  void check(const json& v, const json& schema, const std::string& ptr, std::vector<SchemaIssue>& out) const {
    if (schema.is_boolean()) {
      if (!schema.get<bool>()) add(out, ptr, "value is not allowed here");
      return;
    }
    if (!schema.is_object()) return;
    if (auto it = schema.find("$ref"); it != schema.end()) {
      check(v, resolve(it->get<std::string>()), ptr, out);
    }
    if (auto it = schema.find("type"); it != schema.end()) {
      std::vector<std::string> types;
      if (it->is_string()) types.push_back(it->get<std::string>());
      else for (const auto& t : *it) types.push_back(t.get<std::string>());
      const bool ok = std::any_of(types.begin(), types.end(), [&](const std::string& t) { return has_type(v, t); });
      if (!ok) {
        std::string want;
        for (std::size_t k = 0; k < types.size(); ++k) want += (k ? " or " : "") + types[k];
        add(out, ptr, "expected " + want + ", got " + type_name(v));
        return;
      }
    }
    if (auto it = schema.find("const"); it != schema.end() && v != *it)
      add(out, ptr, "must be " + it->dump() + ", got " + brief(v));
    if (auto it = schema.find("enum"); it != schema.end()) {
      if (std::find(it->begin(), it->end(), v) == it->end()) {
        std::string allowed;
        for (const auto& e : *it) allowed += (allowed.empty() ? "" : ", ") + e.dump();
        add(out, ptr, brief(v) + " is not one of " + allowed);
      }
    }
    if (v.is_number()) numeric(v.get<double>(), schema, ptr, out);
    if (v.is_string()) {
      if (auto it = schema.find("minLength"); it != schema.end() && v.get<std::string>().size() < it->get<std::size_t>())
        add(out, ptr, "string shorter than " + it->dump() + " characters");
    }
    if (v.is_object()) object(v, schema, ptr, out);
    if (v.is_array()) array(v, schema, ptr, out);
    if (auto it = schema.find("anyOf"); it != schema.end()) alternatives(v, *it, ptr, out, false);
    if (auto it = schema.find("oneOf"); it != schema.end()) alternatives(v, *it, ptr, out, true);
  }

 private:
  const json& resolve(const std::string& ref) const {
    static const json empty = json::object();
    if (ref.rfind("#", 0) != 0) return empty;
    const json::json_pointer p(ref.substr(1));
    return root_.contains(p) ? root_.at(p) : empty;
  }

  void add(std::vector<SchemaIssue>& out, const std::string& ptr, std::string msg) const {
    out.push_back({ptr.empty() ? "/" : ptr, std::move(msg), lines_.line_of(ptr)});
  }

  void numeric(double x, const json& schema, const std::string& ptr, std::vector<SchemaIssue>& out) const {
    auto bound = [&](const char* key, auto ok, const char* words) {
      if (auto it = schema.find(key); it != schema.end() && !ok(x, it->template get<double>())) {
        std::ostringstream os;
        os << "value " << json(x).dump() << " must be " << words << ' ' << it->dump();
        add(out, ptr, os.str());
      }
    };
    bound("minimum", [](double a, double b) { return a >= b; }, ">=");
    bound("maximum", [](double a, double b) { return a <= b; }, "<=");
    bound("exclusiveMinimum", [](double a, double b) { return a > b; }, ">");
    bound("exclusiveMaximum", [](double a, double b) { return a < b; }, "<");
  }

  void object(const json& v, const json& schema, const std::string& ptr, std::vector<SchemaIssue>& out) const {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it)
        if (!v.contains(key.get<std::string>())) add(out, ptr, "missing required property \"" + key.get<std::string>() + "\"");
    }
    const json* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
    const bool closed = schema.contains("additionalProperties") && schema.at("additionalProperties").is_boolean() &&
                        !schema.at("additionalProperties").get<bool>();
    for (const auto& [key, child] : v.items()) {
      const std::string cptr = ptr + "/" + escape_pointer_token(key);
      if (props && props->contains(key)) check(child, props->at(key), cptr, out);
      else if (closed) add(out, cptr, "unknown property \"" + key + "\"");
    }
  }

  void array(const json& v, const json& schema, const std::string& ptr, std::vector<SchemaIssue>& out) const {
    if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>())
      add(out, ptr, v.empty() ? "list must not be empty" : "list needs at least " + it->dump() + " items");
    if (auto it = schema.find("maxItems"); it != schema.end() && v.size() > it->get<std::size_t>())
      add(out, ptr, "list allows at most " + it->dump() + " items");
    if (auto it = schema.find("items"); it != schema.end())
      for (std::size_t k = 0; k < v.size(); ++k) check(v[k], *it, ptr + "/" + std::to_string(k), out);
  }

  // Reports the closest failing branch: fewest issues, ties to the earliest.
  // A branch failing on a "kind"-style const discriminator counts as far.
  void alternatives(const json& v, const json& branches, const std::string& ptr, std::vector<SchemaIssue>& out,
                    bool exactly_one) const {
    std::size_t matched = 0;
    std::vector<SchemaIssue> best;
    std::size_t best_score = static_cast<std::size_t>(-1);
    for (const auto& b : branches) {
      std::vector<SchemaIssue> issues;
      check(v, b, ptr, issues);
      if (issues.empty()) {
        ++matched;
        continue;
      }
      std::size_t score = issues.size();
      for (const auto& is : issues)
        if ((is.pointer == (ptr.empty() ? "/" : ptr) && is.message.rfind("expected ", 0) == 0) ||
            is.message.rfind("must be ", 0) == 0)
          score += 1000;
      if (score < best_score) {
        best_score = score;
        best = std::move(issues);
      }
    }
    if (matched == 0) {
      if (best_score >= 1000) {
        std::string forms;
        for (const auto& b : branches) forms += (forms.empty() ? "" : " | ") + describe(b);
        add(out, ptr, "expected " + forms + ", got " + brief(v));
      } else {
        out.insert(out.end(), best.begin(), best.end());
      }
    } else if (exactly_one && matched > 1) {
      add(out, ptr, "value matches more than one allowed form");
    }
  }

  std::string describe(const json& b) const {
    if (b.contains("$ref")) return describe(resolve(b.at("$ref").get<std::string>()));
    if (b.contains("const")) return b.at("const").dump();
    if (b.contains("type")) {
      std::string t = b.at("type").is_string() ? b.at("type").get<std::string>() : b.at("type").dump();
      if (t == "array" && b.contains("items")) t += " of " + describe(b.at("items"));
      if (t == "object" && b.contains("properties") && b.at("properties").contains("kind") &&
          b.at("properties").at("kind").contains("const"))
        t += " with kind " + b.at("properties").at("kind").at("const").dump();
      return t;
    }
    if (b.contains("oneOf") || b.contains("anyOf")) {
      std::string forms;
      for (const auto& x : b.contains("oneOf") ? b.at("oneOf") : b.at("anyOf"))
        forms += (forms.empty() ? "" : " | ") + describe(x);
      return forms;
    }
    return "value";
  }

  const json& root_;
  const LineMap& lines_;
};

}  // namespace

LineMap::LineMap(std::string_view text) {
  Scanner sc(text, lines_);
  sc.value("");
}

int LineMap::line_of(const std::string& pointer) const {
  std::string p = pointer;
  while (true) {
    if (auto it = lines_.find(p); it != lines_.end()) return it->second;
    if (p.empty()) return 0;
    p.erase(p.rfind('/'));
  }
}

std::vector<SchemaIssue> check_schema(const json& instance, const json& schema, const LineMap& lines) {
  std::vector<SchemaIssue> out;
  Checker(schema, lines).check(instance, schema, "", out);
  std::stable_sort(out.begin(), out.end(), [](const SchemaIssue& a, const SchemaIssue& b) { return a.line < b.line; });
  return out;
}

}  // namespace dk::app
