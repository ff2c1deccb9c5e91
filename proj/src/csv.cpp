#include "kgrec/csv.hpp"

#include "kgrec/errors.hpp"

namespace kgrec::csv {

Reader::Reader(std::string_view text, ReaderOptions options) : text_(text), options_(options) {}

std::optional<Record> Reader::next() {
    // Skip completely blank physical lines between records.
    while (pos_ < text_.size() && (text_[pos_] == '\n' || text_[pos_] == '\r')) {
        if (text_[pos_] == '\n') ++line_;
        ++pos_;
    }
    if (pos_ >= text_.size()) return std::nullopt;

    Record record;
    record.line = line_;
    std::string field;
    bool quoted = false;
    bool after_quote = false;

    auto finish_field = [&] {
        record.fields.push_back(std::move(field));
        field.clear();
        quoted = false;
        after_quote = false;
    };

    while (pos_ < text_.size()) {
        char c = text_[pos_];
        if (quoted) {
            if (options_.backslash_escapes && c == '\\' && pos_ + 1 < text_.size() &&
                text_[pos_ + 1] == '"') {
                field.push_back('"');
                pos_ += 2;
                continue;
            }
            if (c == '"') {
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
                    field.push_back('"');
                    pos_ += 2;
                    continue;
                }
                quoted = false;
                after_quote = true;
                ++pos_;
                continue;
            }
            if (c == '\n') ++line_;
            field.push_back(c);
            ++pos_;
            continue;
        }
        if (c == options_.delimiter) {
            finish_field();
            ++pos_;
            continue;
        }
        if (c == '\r' || c == '\n') {
            if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ++pos_;
            ++pos_;
            ++line_;
            finish_field();
            return record;
        }
        if (after_quote) {
            throw ParseError(record.line, "unexpected character after closing quote");
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            ++pos_;
            continue;
        }
        field.push_back(c);
        ++pos_;
    }
    if (quoted) throw ParseError(record.line, "unterminated quoted field");
    finish_field();
    return record;
}

std::vector<Record> read_all(std::string_view text, ReaderOptions options) {
    Reader reader(text, options);
    std::vector<Record> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

std::string quote(std::string_view field, char delimiter) {
    bool needs = field.empty() ? false
                               : (field.front() == ' ' || field.front() == '\t' ||
                                  field.back() == ' ' || field.back() == '\t');
    for (char c : field) {
        if (c == delimiter || c == '"' || c == '\n' || c == '\r') {
            needs = true;
            break;
        }
    }
    if (!needs) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const std::vector<std::string>& fields, char delimiter) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delimiter);
        out += quote(fields[i], delimiter);
    }
    return out;
}

}  // namespace kgrec::csv
