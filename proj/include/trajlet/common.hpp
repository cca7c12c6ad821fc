#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace trajlet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error thrown by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (skeleton files, model bundles, config files).
class parse_error : public error {
  public:
    using error::error;
};

/// Vectors or matrices whose sizes do not agree.
class dimension_error : public error {
  public:
    using error::error;
};

/// A precondition on arguments did not hold.
class invalid_argument : public error {
  public:
    using error::error;
};

/// Error raised by the pipeline, tagged with the stage that failed.
class stage_error : public error {
  public:
    stage_error(std::string stage, const std::string &what)
        : error("[" + stage + "] " + what), stage_{std::move(stage)} {}

    [[nodiscard]] const std::string &stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

/// Sink for non-fatal diagnostics. Defaults to std::clog; tests replace it.
inline std::function<void(std::string_view)> &warning_handler() {
    static std::function<void(std::string_view)> handler = [](std::string_view msg) {
        std::clog << "warning: " << msg << '\n';
    };
    return handler;
}

inline void warn(std::string_view msg) {
    if (warning_handler()) {
        warning_handler()(msg);
    }
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_real(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        throw error("cannot format real value");
    }
    return std::string(buf, end);
}

inline double parse_real(std::string_view text) {
    // from_chars rejects a leading '+'
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw parse_error("not a real number: '" + std::string(text) + "'");
    }
    return value;
}

inline long long parse_integer(std::string_view text) {
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw parse_error("not an integer: '" + std::string(text) + "'");
    }
    return value;
}

/// Splits on any run of spaces or tabs.
inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) {
            ++pos;
        }
        const std::size_t start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') {
            ++pos;
        }
        if (pos > start) {
            out.push_back(line.substr(start, pos - start));
        }
    }
    return out;
}

inline std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

/// Writes `v_1 v_2 ... v_n` with round-trip precision.
inline void write_row(std::ostream &out, const Eigen::Ref<const Vector> &row) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (i > 0) {
            out << ' ';
        }
        out << format_real(row[i]);
    }
}

inline Vector parse_row(std::string_view line, Eigen::Index expected, const std::string &what) {
    const auto fields = split_whitespace(line);
    if (static_cast<Eigen::Index>(fields.size()) != expected) {
        throw parse_error(what + ": expected " + std::to_string(expected) + " values, got " +
                          std::to_string(fields.size()));
    }
    Vector row(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        row[i] = parse_real(fields[static_cast<std::size_t>(i)]);
    }
    return row;
}

}  // namespace trajlet
