#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dk::app {

/// Source line (1-based) of every value in a JSON document, keyed by JSON pointer.
/// Object members map to the line of their key.
class LineMap {
 public:
  LineMap() = default;
  explicit LineMap(std::string_view text);
  /// Line of the pointer or of its nearest recorded ancestor; 0 when unknown.
  int line_of(const std::string& pointer) const;

 private:
  std::map<std::string, int> lines_;
};

struct SchemaIssue {
  std::string pointer;
  std::string message;
  int line = 0;
};

/// Checks `instance` against the subset of JSON Schema used by the shipped
/// config schema: type, enum, const, minimum/maximum (incl. exclusive),
/// minLength, required, properties, additionalProperties (bool), items,
/// minItems/maxItems, oneOf, anyOf and local $ref into "#/$defs/".
std::vector<SchemaIssue> check_schema(const nlohmann::json& instance, const nlohmann::json& schema,
                                      const LineMap& lines = {});

std::string escape_pointer_token(std::string_view token);

}  // namespace dk::app
