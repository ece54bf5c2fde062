#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace registrylint::csv {

/// Streaming RFC 4180 reader: quoted fields may contain delimiters, doubled quotes and newlines.
/// A UTF-8 byte order mark at the start of the stream is skipped.
class Reader {
public:
    explicit Reader(std::istream& in, char delimiter = ',');

    /// Reads the next record into `fields`. Returns false at end of input.
    /// Blank lines are skipped.
    bool next(std::vector<std::string>& fields);

    /// 1-based physical line on which the last returned record started.
    std::size_t line() const { return record_line_; }

private:
    std::istream& in_;
    char delimiter_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
    std::string buffer_;
    bool first_ = true;
};

/// Quotes a field when it contains the delimiter, a quote, CR or LF.
std::string escape(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

} // namespace registrylint::csv
