#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cgpr/errors.hpp"

namespace cgpr {

using Point = Eigen::Vector3d;

// Column order of every 3-vector input: (eps_v, eps_s, p).
enum Feature : int { kEpsV = 0, kEpsS = 1, kPressure = 2 };

/// One row of a triaxial compression test. Stresses and strains are
/// compression-positive; `confinement` is the nominal P_c tag in MPa.
struct TriaxialRecord {
    double eps_a = 0.0;
    double eps_r = 0.0;
    double sig_a = 0.0;
    double sig_r = 0.0;
    double confinement = 0.0;
};

enum class Source { experimental, simulated };

inline std::string to_string(Source s) {
    return s == Source::experimental ? "experimental" : "simulated";
}

inline Source source_from_string(std::string_view s) {
    if (s == "experimental") return Source::experimental;
    if (s == "simulated") return Source::simulated;
    throw DataError("unknown sample source '" + std::string(s) + "'");
}

struct FeatureSample {
    double eps_v = 0.0;
    double eps_s = 0.0;
    double p = 0.0;
    double gamma = 0.0;
    double confinement = 0.0;
    Source source = Source::experimental;

    Point input() const { return {eps_v, eps_s, p}; }
};

/// z = (v - shift) / scale
struct Affine {
    double shift = 0.0;
    double scale = 1.0;

    double forward(double v) const { return (v - shift) / scale; }
    double inverse(double z) const { return z * scale + shift; }
};

struct Normalization {
    std::array<Affine, 3> input{};
    Affine output{};

    Point to_normalized(const Point& x) const {
        return {input[0].forward(x[0]), input[1].forward(x[1]), input[2].forward(x[2])};
    }
    Point to_raw(const Point& z) const {
        return {input[0].inverse(z[0]), input[1].inverse(z[1]), input[2].inverse(z[2])};
    }
};

namespace detail {

inline Affine zscore(const std::vector<double>& v) {
    Affine a;
    if (v.empty()) return a;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    a.shift = mean;
    // A constant feature keeps unit scale so the transform stays invertible.
    a.scale = var > 0.0 ? std::sqrt(var) : 1.0;
    return a;
}

} // namespace detail

inline Normalization fit_normalization(const std::vector<FeatureSample>& samples) {
    std::vector<double> ev, es, p, g;
    ev.reserve(samples.size());
    es.reserve(samples.size());
    p.reserve(samples.size());
    g.reserve(samples.size());
    for (const auto& s : samples) {
        ev.push_back(s.eps_v);
        es.push_back(s.eps_s);
        p.push_back(s.p);
        g.push_back(s.gamma);
    }
    Normalization n;
    n.input = {detail::zscore(ev), detail::zscore(es), detail::zscore(p)};
    n.output = detail::zscore(g);
    return n;
}

struct Dataset {
    std::vector<FeatureSample> samples;
    Normalization normalization;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    /// Distinct confinement tags in ascending order.
    std::vector<double> levels() const {
        std::set<double> s;
        for (const auto& x : samples) s.insert(x.confinement);
        return {s.begin(), s.end()};
    }

    /// Samples grouped by confinement tag, each group in stored order.
    std::map<double, std::vector<FeatureSample>> groups() const {
        std::map<double, std::vector<FeatureSample>> g;
        for (const auto& x : samples) g[x.confinement].push_back(x);
        return g;
    }

    Eigen::MatrixXd raw_inputs() const {
        Eigen::MatrixXd X(samples.size(), 3);
        for (std::size_t i = 0; i < samples.size(); ++i) X.row(i) = samples[i].input().transpose();
        return X;
    }

    Eigen::MatrixXd normalized_inputs() const {
        Eigen::MatrixXd X(samples.size(), 3);
        for (std::size_t i = 0; i < samples.size(); ++i)
            X.row(i) = normalization.to_normalized(samples[i].input()).transpose();
        return X;
    }

    Eigen::VectorXd normalized_gamma() const {
        Eigen::VectorXd y(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            y[i] = normalization.output.forward(samples[i].gamma);
        return y;
    }

    void refit_normalization() { normalization = fit_normalization(samples); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        // trim spaces and a trailing CR
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r' || cell.back() == '\t'))
            cell.remove_suffix(1);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        out.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based file line of each row
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        if (!have_header) {
            if (lineno == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
                line.erase(0, 3); // UTF-8 BOM
            t.header = split_csv_line(line);
            have_header = true;
            continue;
        }
        t.rows.push_back(split_csv_line(line));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw EmptyInputError("empty input file: " + path.string());
    return t;
}

inline std::size_t column_index(const CsvTable& t, const std::string& name, const std::string& file) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw SchemaError("missing column '" + name + "' in " + file);
    return static_cast<std::size_t>(it - t.header.begin());
}

inline double cell_double(const CsvTable& t, std::size_t r, std::size_t c, const std::string& col) {
    const auto& row = t.rows[r];
    double v = 0.0;
    if (c >= row.size() || !parse_double(row[c], v)) {
        std::ostringstream msg;
        msg << "row " << (r + 1) << " (line " << t.line_numbers[r] << "): column '" << col
            << "' is not a number: '" << (c < row.size() ? row[c] : std::string{}) << "'";
        throw ParseError(msg.str(), r + 1);
    }
    return v;
}

} // namespace detail

/// Reads a triaxial CSV with header columns eps_a, eps_r, sig_a, sig_r,
/// confinement (any order, extra columns ignored). Output is sorted by
/// (confinement, eps_a); the sort is stable so ties keep file order.
inline std::vector<TriaxialRecord> parse_triaxial_csv(const std::filesystem::path& path) {
    auto t = detail::read_csv_table(path);
    const std::string file = path.string();
    const std::array<std::string, 5> names{"eps_a", "eps_r", "sig_a", "sig_r", "confinement"};
    std::array<std::size_t, 5> idx{};
    for (std::size_t k = 0; k < names.size(); ++k) idx[k] = detail::column_index(t, names[k], file);
    if (t.rows.empty()) throw EmptyInputError("no data rows in " + file);

    std::vector<TriaxialRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        TriaxialRecord rec;
        rec.eps_a = detail::cell_double(t, r, idx[0], names[0]);
        rec.eps_r = detail::cell_double(t, r, idx[1], names[1]);
        rec.sig_a = detail::cell_double(t, r, idx[2], names[2]);
        rec.sig_r = detail::cell_double(t, r, idx[3], names[3]);
        rec.confinement = detail::cell_double(t, r, idx[4], names[4]);
        out.push_back(rec);
    }
    std::stable_sort(out.begin(), out.end(), [](const TriaxialRecord& a, const TriaxialRecord& b) {
        if (a.confinement != b.confinement) return a.confinement < b.confinement;
        return a.eps_a < b.eps_a;
    });
    return out;
}

inline FeatureSample to_feature(const TriaxialRecord& r, Source src) {
    if (!(r.sig_a >= 0.0) || !(r.sig_r >= 0.0))
        throw DataError("record outside triaxial compression regime (negative stress)");
    FeatureSample s;
    s.eps_v = r.eps_a + 2.0 * r.eps_r;
    s.eps_s = r.eps_a - r.eps_r;
    s.p = (r.sig_a + 2.0 * r.sig_r) / 3.0;
    s.gamma = r.sig_a - r.sig_r;
    s.confinement = r.confinement;
    s.source = src;
    return s;
}

/// Maps records to (eps_v, eps_s, p, Gamma) samples; raw values are kept and
/// a z-score normalization is fitted over the result.
inline Dataset derive_features(const std::vector<TriaxialRecord>& records,
                               Source src = Source::experimental) {
    Dataset ds;
    ds.samples.reserve(records.size());
    for (const auto& r : records) ds.samples.push_back(to_feature(r, src));
    ds.refit_normalization();
    return ds;
}

/// Concatenates datasets and refits the normalization on the union.
inline Dataset merge(const std::vector<Dataset>& parts) {
    Dataset out;
    for (const auto& d : parts) out.samples.insert(out.samples.end(), d.samples.begin(), d.samples.end());
    out.refit_normalization();
    return out;
}

struct Split {
    Dataset train;
    Dataset test;
};

/// Train gets the samples whose tag is in `train_levels` and a normalization
/// fitted on them; test gets the rest and shares the train normalization.
inline Split split_by_confinement(const Dataset& ds, const std::vector<double>& train_levels) {
    if (train_levels.empty()) throw ConfigError("train_levels must be nonempty");
    const auto avail = ds.levels();
    for (double l : train_levels) {
        if (std::find(avail.begin(), avail.end(), l) == avail.end()) {
            std::ostringstream msg;
            msg << "confinement level " << l << " not present; available levels:";
            for (double a : avail) msg << ' ' << a;
            throw DataError(msg.str());
        }
    }
    Split s;
    for (const auto& x : ds.samples) {
        bool in_train = std::find(train_levels.begin(), train_levels.end(), x.confinement) != train_levels.end();
        (in_train ? s.train : s.test).samples.push_back(x);
    }
    s.train.refit_normalization();
    s.test.normalization = s.train.normalization;
    return s;
}

inline void write_dataset_csv(const Dataset& ds, std::ostream& os) {
    os << "eps_v,eps_s,p,gamma,confinement,source\n";
    std::ostringstream line;
    line.precision(17);
    for (const auto& s : ds.samples) {
        line.str({});
        line << s.eps_v << ',' << s.eps_s << ',' << s.p << ',' << s.gamma << ',' << s.confinement << ','
             << to_string(s.source) << '\n';
        os << line.str();
    }
}

/// Reads the feature CSV written by write_dataset_csv.
inline Dataset read_dataset_csv(const std::filesystem::path& path) {
    auto t = detail::read_csv_table(path);
    const std::string file = path.string();
    const std::array<std::string, 5> names{"eps_v", "eps_s", "p", "gamma", "confinement"};
    std::array<std::size_t, 5> idx{};
    for (std::size_t k = 0; k < names.size(); ++k) idx[k] = detail::column_index(t, names[k], file);
    auto src_col = detail::column_index(t, "source", file);
    if (t.rows.empty()) throw EmptyInputError("no data rows in " + file);
    Dataset ds;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        FeatureSample s;
        s.eps_v = detail::cell_double(t, r, idx[0], names[0]);
        s.eps_s = detail::cell_double(t, r, idx[1], names[1]);
        s.p = detail::cell_double(t, r, idx[2], names[2]);
        s.gamma = detail::cell_double(t, r, idx[3], names[3]);
        s.confinement = detail::cell_double(t, r, idx[4], names[4]);
        if (src_col >= t.rows[r].size()) throw ParseError("row " + std::to_string(r + 1) + ": missing source", r + 1);
        s.source = source_from_string(t.rows[r][src_col]);
        ds.samples.push_back(s);
    }
    ds.refit_normalization();
    return ds;
}

} // namespace cgpr
