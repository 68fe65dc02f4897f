#include "tiltwise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tiltwise/errors.hpp"

namespace tiltwise {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// -1 for an empty cell, 0/1 otherwise; anything else is a parse error.
int parse_binary_cell(const std::string& raw, const std::string& column, std::size_t line_no) {
    std::string v = trim(raw);
    if (v.empty()) return -1;
    if (v == "0") return 0;
    if (v == "1") return 1;
    throw ParseError("non-binary value '" + v + "' in column '" + column + "' at data line " +
                     std::to_string(line_no));
}

}  // namespace

void ObservedDataset::validate() const {
    if (n == 0) throw ValidationError("empty dataset");
    if (covariate_names.size() != n_cov) {
        throw ValidationError("covariate_names length does not match covariate count");
    }
    if (x_flat.size() != n * n_cov || s.size() != n || a.size() != n || y.size() != n) {
        throw ValidationError("inconsistent dataset storage sizes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (s[i] != 0 && s[i] != 1) {
            throw ValidationError("s must be 0/1 at row " + std::to_string(i));
        }
        const bool randomized = s[i] == 1;
        if (randomized) {
            if (a[i] != 0 && a[i] != 1)
                throw ValidationError("randomized row " + std::to_string(i) +
                                      " is missing a binary treatment");
            if (y[i] != 0 && y[i] != 1)
                throw ValidationError("randomized row " + std::to_string(i) +
                                      " is missing a binary outcome");
        } else {
            if (a[i] != -1 || y[i] != -1)
                throw ValidationError("non-randomized row " + std::to_string(i) +
                                      " carries treatment or outcome data");
        }
        for (std::size_t j = 0; j < n_cov; ++j) {
            if (!std::isfinite(x_flat[i * n_cov + j])) {
                throw ValidationError("non-finite covariate '" + covariate_names[j] +
                                      "' at row " + std::to_string(i));
            }
        }
    }
}

void ObservedDataset::push_row(std::span<const double> xs, int si, int ai, int yi) {
    if (n == 0 && x_flat.empty()) n_cov = xs.size();
    x_flat.insert(x_flat.end(), xs.begin(), xs.end());
    s.push_back(static_cast<std::int8_t>(si));
    a.push_back(static_cast<std::int8_t>(ai));
    y.push_back(static_cast<std::int8_t>(yi));
    ++n;
}

ObservedDataset ObservedDataset::without_row(std::size_t drop) const {
    ObservedDataset out;
    out.covariate_names = covariate_names;
    out.n_cov = n_cov;
    out.n = n - 1;
    out.x_flat.resize(out.n * n_cov);
    out.s.resize(out.n);
    out.a.resize(out.n);
    out.y.resize(out.n);
    std::copy(x_flat.begin(), x_flat.begin() + static_cast<std::ptrdiff_t>(drop * n_cov),
              out.x_flat.begin());
    std::copy(x_flat.begin() + static_cast<std::ptrdiff_t>((drop + 1) * n_cov), x_flat.end(),
              out.x_flat.begin() + static_cast<std::ptrdiff_t>(drop * n_cov));
    for (std::size_t i = 0, o = 0; i < n; ++i) {
        if (i == drop) continue;
        out.s[o] = s[i];
        out.a[o] = a[i];
        out.y[o] = y[i];
        ++o;
    }
    return out;
}

ObservedDataset ObservedDataset::take(std::span<const std::size_t> indices) const {
    ObservedDataset out;
    out.covariate_names = covariate_names;
    out.n_cov = n_cov;
    out.n = indices.size();
    out.x_flat.resize(out.n * n_cov);
    out.s.resize(out.n);
    out.a.resize(out.n);
    out.y.resize(out.n);
    for (std::size_t o = 0; o < indices.size(); ++o) {
        const std::size_t i = indices[o];
        std::copy_n(x_flat.begin() + static_cast<std::ptrdiff_t>(i * n_cov), n_cov,
                    out.x_flat.begin() + static_cast<std::ptrdiff_t>(o * n_cov));
        out.s[o] = s[i];
        out.a[o] = a[i];
        out.y[o] = y[i];
    }
    return out;
}

CohortSummary summarize(const ObservedDataset& d) {
    CohortSummary cs;
    cs.n_total = d.n;
    std::array<std::size_t, 2> events = {0, 0};
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.s[i] == 1) {
            ++cs.n_randomized;
            if (d.a[i] == 1) {
                ++cs.n_arm1;
                events[1] += static_cast<std::size_t>(d.y[i]);
            } else {
                ++cs.n_arm0;
                events[0] += static_cast<std::size_t>(d.y[i]);
            }
        } else {
            ++cs.n_nonrandomized;
        }
    }
    cs.outcome_rate_by_arm[1] =
        cs.n_arm1 ? static_cast<double>(events[1]) / static_cast<double>(cs.n_arm1)
                  : std::nan("");
    cs.outcome_rate_by_arm[0] =
        cs.n_arm0 ? static_cast<double>(events[0]) / static_cast<double>(cs.n_arm0)
                  : std::nan("");
    return cs;
}

ObservedDataset load_dataset(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw ParseError("'" + path + "': missing header row");
    const std::vector<std::string> columns = split_csv_line(header);

    auto column_index = [&](const std::string& name) {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (trim(columns[j]) == name) return j;
        }
        throw SchemaError("column '" + name + "' not found in '" + path + "'");
    };

    std::vector<std::size_t> cov_idx;
    cov_idx.reserve(schema.covariates.size());
    for (const auto& name : schema.covariates) cov_idx.push_back(column_index(name));
    std::vector<std::size_t> hot_idx;
    for (const auto& name : schema.one_hot) hot_idx.push_back(column_index(name));
    const std::size_t s_idx = column_index(schema.s);
    const std::size_t a_idx = column_index(schema.a);
    const std::size_t y_idx = column_index(schema.y);

    // First pass: collect raw cells so one-hot levels can be resolved before
    // covariate vectors are laid out.
    std::vector<std::vector<std::string>> raw_rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != columns.size()) {
            throw ParseError("'" + path + "': data line " + std::to_string(line_no) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(columns.size()));
        }
        raw_rows.push_back(std::move(fields));
    }
    if (raw_rows.empty()) throw ValidationError("empty dataset: '" + path + "' has no data rows");

    // Distinct levels per one-hot column, lexicographic; the first level is
    // the reference and gets no indicator.
    std::vector<std::vector<std::string>> levels(hot_idx.size());
    for (std::size_t h = 0; h < hot_idx.size(); ++h) {
        std::map<std::string, bool> seen;
        for (const auto& row : raw_rows) {
            std::string v = trim(row[hot_idx[h]]);
            if (v.empty()) {
                throw ValidationError("complete-case input required: missing value in one-hot column '" +
                                      schema.one_hot[h] + "'");
            }
            seen[v] = true;
        }
        for (const auto& [lvl, _] : seen) levels[h].push_back(lvl);
    }

    ObservedDataset d;
    for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
        d.covariate_names.push_back(schema.covariates[j]);
    }
    for (std::size_t h = 0; h < hot_idx.size(); ++h) {
        for (std::size_t l = 1; l < levels[h].size(); ++l) {
            d.covariate_names.push_back(schema.one_hot[h] + "=" + levels[h][l]);
        }
    }
    d.n_cov = d.covariate_names.size();

    std::size_t ignored_ay = 0;
    std::vector<double> xs(d.n_cov);
    for (std::size_t r = 0; r < raw_rows.size(); ++r) {
        const auto& row = raw_rows[r];
        std::size_t k = 0;
        for (std::size_t j = 0; j < cov_idx.size(); ++j) {
            std::string v = trim(row[cov_idx[j]]);
            if (v.empty()) {
                throw ValidationError("complete-case input required: missing covariate '" +
                                      schema.covariates[j] + "' at data line " +
                                      std::to_string(r + 1));
            }
            char* end = nullptr;
            double parsed = std::strtod(v.c_str(), &end);
            if (end == v.c_str() || *end != '\0' || !std::isfinite(parsed)) {
                throw ParseError("covariate '" + schema.covariates[j] + "' at data line " +
                                 std::to_string(r + 1) + " is not a finite number: '" + v + "'");
            }
            xs[k++] = parsed;
        }
        for (std::size_t h = 0; h < hot_idx.size(); ++h) {
            const std::string v = trim(row[hot_idx[h]]);
            for (std::size_t l = 1; l < levels[h].size(); ++l) {
                xs[k++] = (v == levels[h][l]) ? 1.0 : 0.0;
            }
        }

        const int si = parse_binary_cell(row[s_idx], schema.s, r + 1);
        if (si < 0) throw ParseError("missing s value at data line " + std::to_string(r + 1));
        int ai = parse_binary_cell(row[a_idx], schema.a, r + 1);
        int yi = parse_binary_cell(row[y_idx], schema.y, r + 1);
        if (si == 1) {
            if (ai < 0)
                throw ValidationError("randomized row at data line " + std::to_string(r + 1) +
                                      " is missing a treatment value");
            if (yi < 0)
                throw ValidationError("randomized row at data line " + std::to_string(r + 1) +
                                      " is missing an outcome value");
        } else {
            if (ai >= 0 || yi >= 0) ++ignored_ay;
            ai = -1;
            yi = -1;
        }
        d.push_row(xs, si, ai, yi);
    }
    if (ignored_ay > 0) {
        d.warnings.push_back("ignored treatment/outcome values on " + std::to_string(ignored_ay) +
                             " non-randomized row(s)");
    }
    d.validate();
    return d;
}

void write_dataset_csv(const ObservedDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (std::size_t j = 0; j < d.n_cov; ++j) out << d.covariate_names[j] << ",";
    out << "s,a,y\n";
    char buf[64];
    for (std::size_t i = 0; i < d.n; ++i) {
        auto xs = d.x(i);
        for (std::size_t j = 0; j < d.n_cov; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", xs[j]);
            out << buf << ",";
        }
        out << int(d.s[i]) << ",";
        if (d.a[i] >= 0) out << int(d.a[i]);
        out << ",";
        if (d.y[i] >= 0) out << int(d.y[i]);
        out << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace tiltwise
