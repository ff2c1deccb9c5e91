#pragma once

// Small RFC-4180 reader/writer used by the property-csv dialect, the credits
// file and the Book-Crossing dumps.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kgrec::csv {

struct Record {
    std::size_t line = 0;  // 1-based physical line where the record starts
    std::vector<std::string> fields;
};

struct ReaderOptions {
    char delimiter = ',';
    // Book-Crossing dumps escape quotes as \" inside quoted fields.
    bool backslash_escapes = false;
};

// Streams records out of an in-memory buffer. Throws ParseError on an
// unterminated quoted field or stray characters after a closing quote.
class Reader {
public:
    explicit Reader(std::string_view text, ReaderOptions options = {});

    std::optional<Record> next();

private:
    std::string_view text_;
    ReaderOptions options_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

std::vector<Record> read_all(std::string_view text, ReaderOptions options = {});

// Quotes a field when it contains the delimiter, a quote, CR/LF, or
// leading/trailing whitespace.
std::string quote(std::string_view field, char delimiter = ',');

std::string join(const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace kgrec::csv
