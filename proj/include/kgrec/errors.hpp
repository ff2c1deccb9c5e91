#pragma once

// Exception hierarchy shared by every kgrec module. All errors derive from
// kgrec::Error so callers (the CLI in particular) can separate data errors
// from programming errors with a single catch.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgrec {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- kg_store

class EmptyLabel : public Error {
public:
    EmptyLabel() : Error("label is empty after trimming") {}
};

class InvalidLabel : public Error {
public:
    explicit InvalidLabel(const std::string& why) : Error("invalid label: " + why) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

// ------------------------------------------------------------------ ingest

class MissingFile : public Error {
public:
    explicit MissingFile(const std::string& path) : Error("missing file: " + path), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class RowFormatError : public Error {
public:
    RowFormatError(const std::string& file, std::size_t line, const std::string& reason)
        : Error(file + ":" + std::to_string(line) + ": " + reason), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// -------------------------------------------------------------- preprocess

class UnknownUser : public Error {
public:
    explicit UnknownUser(const std::string& id) : Error("unknown user: " + id) {}
};

class TooFewRows : public Error {
public:
    explicit TooFewRows(std::size_t n)
        : Error("need at least 5 rows to split, got " + std::to_string(n)) {}
};

// ----------------------------------------------------------------- numeric

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

// --------------------------------------------------------------------- mkr

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public Error {
public:
    using Error::Error;
};

class ChecksumMismatch : public Error {
public:
    using Error::Error;
};

class UnknownItem : public Error {
public:
    explicit UnknownItem(const std::string& id) : Error("unknown item: " + id) {}
};

class MissingFallback : public Error {
public:
    MissingFallback() : Error("user is unknown and no (age, job) fallback was supplied") {}
};

// ---------------------------------------------------------------- eval_cli

class SingleClass : public Error {
public:
    SingleClass() : Error("AUC needs both positive and negative labels") {}
};

class EmptyInput : public Error {
public:
    EmptyInput() : Error("metric input is empty") {}
};

}  // namespace kgrec
