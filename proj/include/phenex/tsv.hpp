#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace phenex::tsv {

std::vector<std::string_view> split(std::string_view line, char sep = '\t');

/// Fixed-point with the given number of decimals ("%.*f").
std::string fixed(double value, int decimals);

/// Shortest round-trippable representation ("%.17g"), "nan" / "inf" passed through.
std::string real(double value);

double parse_double(std::string_view field, std::string_view context);
long long parse_int(std::string_view field, std::string_view context);

std::ofstream open_out(const std::filesystem::path& path);
std::ifstream open_in(const std::filesystem::path& path);

/// Reads a file line by line; strips a trailing '\r'. Returns false at EOF.
bool next_line(std::istream& in, std::string& line);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

} // namespace phenex::tsv
