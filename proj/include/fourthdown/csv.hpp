#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fourthdown::csv {

/// Reads one RFC 4180 record (quoted fields may span lines). Returns
/// nullopt at end of input.
std::optional<std::vector<std::string>> read_record(std::istream& in);

/// Quotes a field when it contains a delimiter, quote or line break.
std::string escape(std::string_view field);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace fourthdown::csv
