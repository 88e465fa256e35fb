#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "gsync/error.hpp"
#include "gsync/linalg.hpp"

namespace gsync {

/// Round-trippable decimal form ("%.17g"), with nan/inf spelled out.
[[nodiscard]] inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

[[nodiscard]] inline std::string format_vector(const Vector& v, char sep = ' ') {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += format_number(v(i));
    }
    return out;
}

/// CSV table with leading `# key: value` metadata lines.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) {
            throw Error(ErrorCode::LengthMismatch, "CSV row has " + std::to_string(values.size()) + " fields, expected " +
                                                       std::to_string(columns_.size()));
        }
        rows_.push_back(values);
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }

    template <typename Stream>
    void write(Stream& os) const {
        for (const auto& [k, v] : meta_) os << "# " << k << ": " << v << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_number(r[i]);
            os << '\n';
        }
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw Error(ErrorCode::Config, "cannot write " + path);
        write(os);
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<std::vector<double>> rows_;
};

}  // namespace gsync
