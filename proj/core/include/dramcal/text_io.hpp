#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the file-format readers and writers.
namespace dramcal::text {

std::string read_file(const std::filesystem::path& path, const std::string& stage);
void write_file(const std::filesystem::path& path, std::string_view contents, const std::string& stage);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

// Shortest representation that round-trips exactly.
std::string fmt_double(double v);

// Strict parses; return false on trailing garbage or overflow.
bool parse_double(std::string_view s, double& out);
bool parse_u64(std::string_view s, std::uint64_t& out);  // accepts 0x prefix

// Iterates lines, tracking 1-based line numbers. Lines keep no '\n' / '\r'.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    bool next(std::string_view& line);
    std::size_t line_number() const { return line_no_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

}  // namespace dramcal::text
