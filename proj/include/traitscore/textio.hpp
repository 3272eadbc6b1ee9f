#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace traitscore {

// RFC-4180 style CSV: quoted fields may contain commas, quotes ("" escape)
// and newlines. The essay corpus ships in exactly this shape.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::vector<std::vector<std::string>> read_csv_file(const std::string& path);

// Quotes a field only when it needs it.
std::string csv_escape(std::string_view field);

// Shortest round-trip decimal form (std::to_chars). Locale-free, byte-stable.
std::string fmt_double(double v);
double parse_double(std::string_view s);           // throws on garbage
std::int64_t parse_int(std::string_view s);        // throws on garbage

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

std::vector<std::string> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Flat "key = value" config text with dotted section prefixes and '#'
// comments. Later keys override earlier ones.
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace traitscore
