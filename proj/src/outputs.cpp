#include "tiltwise/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tiltwise/errors.hpp"
#include "tiltwise/version.hpp"

namespace tiltwise {

using nlohmann::json;

std::string format17(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_curves_csv(const std::string& path, const std::vector<CurveOutputRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "eta1,eta0,estimand,estimator,point,se,ci_low,ci_high,n_failed_replicates,ci_method\n";
    for (const CurveOutputRow& r : rows) {
        out << format17(r.point.eta1) << "," << format17(r.point.eta0) << ","
            << to_string(r.point.estimand) << "," << to_string(r.point.estimator) << ","
            << format17(r.point.value) << ",";
        if (r.ci_method != "none") {
            out << format17(r.se) << "," << format17(r.ci_low) << "," << format17(r.ci_high)
                << "," << r.n_failed_replicates;
        } else {
            out << ",,,0";
        }
        out << "," << r.ci_method << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
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

double parse_or_nan(const std::string& s) {
    if (s.empty()) return std::nan("");
    return std::strtod(s.c_str(), nullptr);
}

}  // namespace

std::vector<CurveOutputRow> read_curves_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw ParseError("'" + path + "': empty file");
    const auto cols = split_line(header);
    std::map<std::string, std::size_t> at;
    for (std::size_t j = 0; j < cols.size(); ++j) at[cols[j]] = j;
    for (const char* required : {"eta1", "eta0", "estimand", "estimator", "point", "se",
                                 "ci_low", "ci_high", "n_failed_replicates", "ci_method"}) {
        if (!at.count(required)) {
            throw SchemaError("'" + path + "': missing column '" + required + "'");
        }
    }

    std::vector<CurveOutputRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_line(line);
        CurveOutputRow r;
        r.point.eta1 = parse_or_nan(f[at["eta1"]]);
        r.point.eta0 = parse_or_nan(f[at["eta0"]]);
        auto est = estimand_from_string(f[at["estimand"]]);
        auto kind = estimator_from_string(f[at["estimator"]]);
        if (!est || !kind) throw ParseError("'" + path + "': unknown estimand/estimator tag");
        r.point.estimand = *est;
        r.point.estimator = *kind;
        r.point.value = parse_or_nan(f[at["point"]]);
        r.se = parse_or_nan(f[at["se"]]);
        r.ci_low = parse_or_nan(f[at["ci_low"]]);
        r.ci_high = parse_or_nan(f[at["ci_high"]]);
        r.n_failed_replicates = static_cast<std::size_t>(
            std::strtoull(f[at["n_failed_replicates"]].c_str(), nullptr, 10));
        r.ci_method = f[at["ci_method"]];
        rows.push_back(r);
    }
    return rows;
}

namespace {

json sensitivity_json(const SensitivitySpec& spec) {
    json j;
    j["linkage"] =
        spec.linkage == SensitivitySpec::Linkage::linked ? "linked" : "independent";
    if (spec.linkage == SensitivitySpec::Linkage::linked) {
        j["eta_grid"] = spec.eta_grid;
    } else {
        auto pairs = json::array();
        for (const auto& p : spec.eta_pairs) pairs.push_back({p[0], p[1]});
        j["eta_pairs"] = pairs;
    }
    auto estimators = json::array();
    for (auto k : spec.estimators) estimators.push_back(std::string(to_string(k)));
    j["estimators"] = estimators;
    auto estimands = json::array();
    for (auto e : spec.estimands) estimands.push_back(std::string(to_string(e)));
    j["estimands"] = estimands;
    return j;
}

}  // namespace

void write_metadata_json(const std::string& path, const RunConfig& config, std::size_t n_rows,
                         const std::vector<std::string>& warnings) {
    json j;
    j["version"] = TILTWISE_VERSION;
    j["n"] = n_rows;
    j["data"] = config.data_path;
    j["models"] = describe_models(config.models);
    j["sensitivity"] = sensitivity_json(config.sensitivity);
    j["dr"] = config.dr;
    json inf;
    switch (config.inference.ci) {
        case InferencePlan::Ci::none: inf["ci"] = "none"; break;
        case InferencePlan::Ci::jackknife: inf["ci"] = "jackknife"; break;
        case InferencePlan::Ci::bootstrap: inf["ci"] = "bootstrap"; break;
        case InferencePlan::Ci::both: inf["ci"] = "both"; break;
    }
    inf["boot_reps"] = config.inference.boot_reps;
    inf["seed"] = config.inference.seed;
    inf["level"] = config.inference.level;
    inf["stratify_by_s"] = config.inference.stratified_by_s;
    j["inference"] = inf;
    j["warnings"] = warnings;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

void write_truth_json(const std::string& path, const DgpSpec& spec, const OracleTruth& truth) {
    json j;
    j["n"] = spec.n;
    j["seed"] = spec.seed;
    j["eta_star"] = {spec.eta_star1, spec.eta_star0};
    j["psi1_true"] = truth.psi1;
    j["psi0_true"] = truth.psi0;
    j["phi1_true"] = truth.phi1;
    j["phi0_true"] = truth.phi0;
    j["rd_all_true"] = truth.rd_all;
    if (truth.rr_all) j["rr_all_true"] = *truth.rr_all;
    j["rd_s0_true"] = truth.rd_s0;
    if (truth.rr_s0) j["rr_s0_true"] = *truth.rr_s0;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// SVG curve plot: eta on x, estimand value on y; one solid path per estimator
// plus two dashed interval paths when intervals are present.

namespace {

struct SeriesPoint {
    double eta;
    double value;
    double lo;
    double hi;
    bool has_ci;
};

constexpr double kW = 640, kH = 440;
constexpr double kMarginL = 64, kMarginR = 20, kMarginT = 28, kMarginB = 48;

std::string path_d(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::string d;
    char buf[64];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.2f %.2f", i == 0 ? "M" : " L", xs[i], ys[i]);
        d += buf;
    }
    return d;
}

}  // namespace

void write_curve_svg(const std::string& path, Estimand estimand,
                     const std::vector<CurveOutputRow>& rows) {
    // Pick one interval variant per cell (jackknife preferred when both exist).
    std::map<std::string, std::vector<SeriesPoint>> series;
    std::map<std::pair<std::string, double>, CurveOutputRow> chosen;
    for (const CurveOutputRow& r : rows) {
        if (r.point.estimand != estimand) continue;
        const auto key = std::make_pair(std::string(to_string(r.point.estimator)), r.point.eta1);
        auto it = chosen.find(key);
        if (it == chosen.end() || (it->second.ci_method != "jackknife" &&
                                   r.ci_method == "jackknife")) {
            chosen[key] = r;
        }
    }
    for (const auto& [key, r] : chosen) {
        const bool has_ci = r.ci_method != "none" && std::isfinite(r.ci_low);
        series[key.first].push_back(
            {r.point.eta1, r.point.value, r.ci_low, r.ci_high, has_ci});
    }
    if (series.empty()) throw ValidationError("no rows to plot for this estimand");

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (auto& [tag, pts] : series) {
        std::sort(pts.begin(), pts.end(),
                  [](const SeriesPoint& a, const SeriesPoint& b) { return a.eta < b.eta; });
        for (const SeriesPoint& pt : pts) {
            if (!std::isfinite(pt.value)) continue;
            xmin = std::min(xmin, pt.eta);
            xmax = std::max(xmax, pt.eta);
            ymin = std::min(ymin, pt.has_ci ? pt.lo : pt.value);
            ymax = std::max(ymax, pt.has_ci ? pt.hi : pt.value);
        }
    }
    if (xmin > xmax) throw ValidationError("no finite values to plot for this estimand");
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double v) {
        return kMarginL + (v - xmin) / (xmax - xmin) * (kW - kMarginL - kMarginR);
    };
    auto sy = [&](double v) {
        return kH - kMarginB - (v - ymin) / (ymax - ymin) * (kH - kMarginT - kMarginB);
    };

    static const char* kColors[] = {"#000000", "#1f6fb2", "#b2321f"};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << kH - kMarginB << "\" x2=\""
        << kW - kMarginR << "\" y2=\"" << kH - kMarginB
        << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
        << "\" y2=\"" << kH - kMarginB << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << (kW / 2) << "\" y=\"" << kH - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">eta</text>\n";
    out << "<text x=\"16\" y=\"" << (kH / 2)
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << (kH / 2) << ")\">" << to_string(estimand) << "</text>\n";
    char buf[64];
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        std::snprintf(buf, sizeof buf, "%.3g", fx);
        out << "<text x=\"" << sx(fx) << "\" y=\"" << kH - kMarginB + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.3g", fy);
        out << "<text x=\"" << kMarginL - 8 << "\" y=\"" << sy(fy) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
    }

    int color_idx = 0;
    double legend_y = kMarginT + 4;
    for (const auto& [tag, pts] : series) {
        const char* color = kColors[color_idx % 3];
        ++color_idx;
        std::vector<double> xs, ys, los, his;
        bool all_ci = true;
        for (const SeriesPoint& pt : pts) {
            if (!std::isfinite(pt.value)) continue;
            xs.push_back(sx(pt.eta));
            ys.push_back(sy(pt.value));
            if (pt.has_ci && std::isfinite(pt.lo) && std::isfinite(pt.hi)) {
                los.push_back(sy(pt.lo));
                his.push_back(sy(pt.hi));
            } else {
                all_ci = false;
            }
        }
        if (xs.empty()) continue;
        out << "<path d=\"" << path_d(xs, ys) << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.8\"/>\n";
        if (all_ci && los.size() == xs.size()) {
            out << "<path d=\"" << path_d(xs, los) << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\"/>\n";
            out << "<path d=\"" << path_d(xs, his) << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\"/>\n";
        }
        out << "<text x=\"" << kW - kMarginR - 4 << "\" y=\"" << legend_y
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << tag
            << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
    if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace tiltwise
