#include "symlab/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "symlab/error.hpp"

namespace symlab {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::size_t parse_count(std::string_view text, std::size_t line) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("expected a nonnegative integer, got '" + std::string(text) + "'", line);
    return value;
}

double parse_double(std::string_view text, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("cannot parse '" + std::string(text) + "' as a number", line);
    if (!std::isfinite(value)) throw ParseError("non-finite entry '" + std::string(text) + "'", line);
    return value;
}

std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t out = 0;
    for (int k = 0; k < 8; ++k) out |= ((v >> (8 * k)) & 0xffu) << (8 * (7 - k));
    return out;
}

}  // namespace

MatrixFile parse_matrix(std::string_view content) {
    MatrixFile out;
    std::map<std::string, std::string> header;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool ended = false;

    while (pos < content.size()) {
        const std::size_t eol = content.find('\n', pos);
        const std::string_view raw =
            content.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        if (raw.empty() || raw.front() != '#') break;
        ++line_no;
        pos = eol == std::string_view::npos ? content.size() : eol + 1;
        const std::string_view body = trim(raw.substr(1));
        if (body == "end") {
            ended = true;
            break;
        }
        const auto colon = body.find(':');
        if (colon == std::string_view::npos) throw ParseError("header line without ':'", line_no);
        const std::string key(trim(body.substr(0, colon)));
        const std::string value(trim(body.substr(colon + 1)));
        static const char* const known[] = {"name", "rows", "cols", "format", "labels", "provenance"};
        if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
            throw ParseError("unknown header key '" + key + "'", line_no);
        if (!header.emplace(key, value).second) throw ParseError("duplicate header key '" + key + "'", line_no);
    }

    if (!header.contains("rows") || !header.contains("cols"))
        throw ParseError("header must declare rows and cols", line_no + 1);
    const std::size_t rows = parse_count(header["rows"], line_no);
    const std::size_t cols = parse_count(header["cols"], line_no);
    out.name = header["name"];
    out.provenance = header["provenance"];
    const std::string fmt = header.contains("format") ? header["format"] : "text";
    if (fmt == "text") {
        out.format = PayloadFormat::Text;
    } else if (fmt == "binary") {
        out.format = PayloadFormat::Binary;
    } else {
        throw ParseError("unknown format '" + fmt + "'", line_no);
    }
    if (header.contains("labels") && !header["labels"].empty()) {
        try {
            const auto j = nlohmann::json::parse(header["labels"]);
            out.labels = j.get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("labels must be a JSON string array: ") + e.what(), line_no);
        }
        if (out.labels.size() != rows)
            throw ParseError("expected " + std::to_string(rows) + " labels, found " +
                                 std::to_string(out.labels.size()),
                             line_no);
    }

    std::vector<double> values;
    values.reserve(rows * cols);
    if (out.format == PayloadFormat::Binary) {
        if (!ended) throw ParseError("binary payload must follow a '# end' line", line_no + 1);
        const std::size_t bytes = content.size() - pos;
        if (bytes != rows * cols * 8)
            throw ParseError("binary payload has " + std::to_string(bytes) + " bytes, expected " +
                                 std::to_string(rows * cols * 8),
                             line_no + 1);
        for (std::size_t k = 0; k < rows * cols; ++k) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, content.data() + pos + 8 * k, 8);
            const double v = std::bit_cast<double>(to_little_endian(bits));
            if (!std::isfinite(v)) throw ParseError("non-finite entry in binary payload", line_no + 1);
            values.push_back(v);
        }
    } else {
        std::size_t row = 0;
        while (pos < content.size()) {
            const std::size_t eol = content.find('\n', pos);
            const std::string_view raw =
                content.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
            pos = eol == std::string_view::npos ? content.size() : eol + 1;
            ++line_no;
            const std::string_view line = trim(raw);
            if (line.empty()) continue;
            if (line.front() == '#') throw ParseError("header line inside the payload", line_no);
            if (row == rows)
                throw ParseError("more than the declared " + std::to_string(rows) + " rows", line_no);
            std::size_t count = 0;
            std::size_t p = 0;
            while (p < line.size()) {
                const std::size_t start = line.find_first_not_of(" \t", p);
                if (start == std::string_view::npos) break;
                std::size_t end = line.find_first_of(" \t", start);
                if (end == std::string_view::npos) end = line.size();
                values.push_back(parse_double(line.substr(start, end - start), line_no));
                ++count;
                p = end;
            }
            if (count != cols)
                throw ParseError("row has " + std::to_string(count) + " entries, expected " +
                                     std::to_string(cols),
                                 line_no);
            ++row;
        }
        if (row != rows)
            throw ParseError("found " + std::to_string(row) + " rows, expected " + std::to_string(rows),
                             line_no + 1);
    }
    out.data = Matrix(rows, cols, std::move(values));
    return out;
}

MatrixFile read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_matrix(buffer.str());
}

std::string serialize_matrix(const MatrixFile& file) {
    const Matrix& m = file.data;
    if (!file.labels.empty() && file.labels.size() != m.rows())
        throw InvalidInput("label count does not match the row count");
    for (const std::string* s : {&file.name, &file.provenance})
        if (s->find('\n') != std::string::npos) throw InvalidInput("header values must be single-line");
    std::string out;
    out += "# name: " + file.name + "\n";
    out += "# rows: " + std::to_string(m.rows()) + "\n";
    out += "# cols: " + std::to_string(m.cols()) + "\n";
    out += std::string("# format: ") + (file.format == PayloadFormat::Binary ? "binary" : "text") + "\n";
    if (!file.labels.empty()) out += "# labels: " + nlohmann::json(file.labels).dump() + "\n";
    if (!file.provenance.empty()) out += "# provenance: " + file.provenance + "\n";
    if (file.format == PayloadFormat::Binary) {
        out += "# end\n";
        for (double v : m.data()) {
            const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
            char bytes[8];
            std::memcpy(bytes, &bits, 8);
            out.append(bytes, 8);
        }
        return out;
    }
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j) out += ' ';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void write_matrix(const MatrixFile& file, const std::filesystem::path& path) {
    const std::string bytes = serialize_matrix(file);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("failed writing " + path.string());
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace symlab
