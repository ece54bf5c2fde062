#include "registrylint/csv.hpp"

namespace registrylint::csv {

Reader::Reader(std::istream& in, char delimiter)
: in_(in)
, delimiter_(delimiter)
{
}

bool Reader::next(std::vector<std::string>& fields)
{
    fields.clear();
    while (true) {
        if (!std::getline(in_, buffer_)) {
            return false;
        }
        ++line_;
        if (first_) {
            first_ = false;
            if (buffer_.size() >= 3 && buffer_.compare(0, 3, "\xEF\xBB\xBF") == 0) {
                buffer_.erase(0, 3);
            }
        }
        if (!buffer_.empty() && buffer_.back() == '\r') {
            buffer_.pop_back();
        }
        if (!buffer_.empty()) {
            break;
        }
    }
    record_line_ = line_;

    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i >= buffer_.size()) {
            if (quoted) {
                // Quoted field spans a line break.
                std::string more;
                if (!std::getline(in_, more)) {
                    break;
                }
                ++line_;
                if (!more.empty() && more.back() == '\r') {
                    more.pop_back();
                }
                field.push_back('\n');
                buffer_ = std::move(more);
                i = 0;
                continue;
            }
            break;
        }
        const char c = buffer_[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < buffer_.size() && buffer_[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter_) {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
        ++i;
    }
    fields.push_back(std::move(field));
    return true;
}

std::string escape(std::string_view field, char delimiter)
{
    if (field.find_first_of(std::string{delimiter, '"', '\r', '\n'}) == std::string_view::npos) {
        return std::string(field);
    }
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out.put(delimiter);
        }
        out << escape(fields[i], delimiter);
    }
    out.put('\n');
}

} // namespace registrylint::csv
