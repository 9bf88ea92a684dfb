#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "symlab/matrix.hpp"

namespace symlab {

enum class PayloadFormat { Text, Binary };

/// A matrix with its interchange header.
///
/// On disk the header is a run of `# key: value` lines (name, rows, cols,
/// format, labels as a JSON string array, provenance). A text payload
/// follows as one whitespace-separated row per line. A binary payload
/// follows a `# end` line as rows*cols little-endian IEEE doubles.
struct MatrixFile {
    std::string name;
    Matrix data;
    std::vector<std::string> labels;
    std::string provenance;
    PayloadFormat format = PayloadFormat::Text;
};

/// Throws ParseError (with the offending line) on malformed headers, shape
/// mismatches, unparsable or non-finite entries.
MatrixFile parse_matrix(std::string_view content);
MatrixFile read_matrix(const std::filesystem::path& path);

std::string serialize_matrix(const MatrixFile& file);
void write_matrix(const MatrixFile& file, const std::filesystem::path& path);

/// 64-bit FNV-1a, used for manifest content hashes and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace symlab
