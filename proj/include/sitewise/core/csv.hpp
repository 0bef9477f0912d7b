#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/core/format.hpp"

namespace sitewise {

/// Comma-separated table with a mandatory header row. Double-quoted fields may contain commas.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> row_lines; // 1-based source line of each row

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }

    int require_column(std::string_view name) const {
        int c = column(name);
        if (c < 0) throw ParseError("missing column '" + std::string(name) + "'", 1);
        return c;
    }

    double number(std::size_t row, int col) const {
        auto v = parse_double(rows[row][static_cast<std::size_t>(col)]);
        if (!v) throw ParseError("non-numeric value '" + rows[row][static_cast<std::size_t>(col)] + "'", row_lines[row]);
        return *v;
    }

    long long integer(std::size_t row, int col) const {
        auto v = parse_int(rows[row][static_cast<std::size_t>(col)]);
        if (!v) throw ParseError("non-integer value '" + rows[row][static_cast<std::size_t>(col)] + "'", row_lines[row]);
        return *v;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::string(trim(field)));
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    out.push_back(std::string(trim(field)));
    return out;
}

} // namespace detail

inline CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno);
        t.rows.push_back(std::move(fields));
        t.row_lines.push_back(lineno);
    }
    if (!have_header) throw ParseError("empty csv (missing header row)", 0);
    return t;
}

inline CsvTable load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return parse_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path.filename().string() + ": " + e.what(), 0);
    }
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += '"';
    return out;
}

/// Builds one csv line from heterogeneous fields.
class CsvLine {
public:
    CsvLine& operator<<(std::string_view s) {
        sep();
        out_ += csv_escape(s);
        return *this;
    }
    CsvLine& operator<<(const std::string& s) { return *this << std::string_view(s); }
    CsvLine& operator<<(const char* s) { return *this << std::string_view(s); }
    CsvLine& operator<<(double v) {
        sep();
        out_ += format_double(v);
        return *this;
    }
    CsvLine& operator<<(int v) {
        sep();
        out_ += std::to_string(v);
        return *this;
    }
    CsvLine& operator<<(long long v) {
        sep();
        out_ += std::to_string(v);
        return *this;
    }
    CsvLine& operator<<(std::size_t v) {
        sep();
        out_ += std::to_string(v);
        return *this;
    }
    CsvLine& operator<<(bool v) {
        sep();
        out_ += v ? "true" : "false";
        return *this;
    }
    const std::string& str() const { return out_; }

private:
    void sep() {
        if (!first_) out_.push_back(',');
        first_ = false;
    }
    std::string out_;
    bool first_ = true;
};

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace sitewise
