#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgpr/errors.hpp"
#include "cgpr/gp.hpp"
#include "cgpr/kcc.hpp"

namespace cgpr {

inline constexpr const char* kModelHeader = "CGPR-MODEL-1";

namespace detail {

using nlohmann::json;

inline json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json to_json(const Affine& a) { return {{"shift", a.shift}, {"scale", a.scale}}; }
inline Affine affine_from(const json& j) { return {j.at("shift").get<double>(), j.at("scale").get<double>()}; }

inline json to_json(const PolyMean& pm) {
    return {{"degree", pm.degree}, {"beta", to_json(pm.beta)}, {"lambda_reg", pm.lambda_reg},
            {"eps_s_max", pm.eps_s_max}};
}

inline PolyMean polymean_from(const json& j) {
    PolyMean pm;
    pm.degree = j.at("degree").get<int>();
    pm.beta = vector_from(j.at("beta"));
    pm.lambda_reg = j.at("lambda_reg").get<double>();
    pm.eps_s_max = j.at("eps_s_max").get<double>();
    pm.validate();
    return pm;
}

} // namespace detail

/// Header line followed by one JSON document.
inline void save_model(const GpModel& m, std::ostream& os) {
    using detail::json;
    json j;
    const auto& th = m.hyperparameters();
    j["hyperparameters"] = {{"ell", {th.ell[0], th.ell[1], th.ell[2]}}, {"sigma_f", th.sigma_f}, {"sigma_n", th.sigma_n}};
    const auto& n = m.normalization();
    j["normalization"] = {{"eps_v", detail::to_json(n.input[0])}, {"eps_s", detail::to_json(n.input[1])},
                          {"p", detail::to_json(n.input[2])}, {"gamma", detail::to_json(n.output)}};
    j["mean"] = m.mean() ? detail::to_json(*m.mean()) : json(nullptr);
    json X = json::array();
    for (Eigen::Index i = 0; i < m.train_X().rows(); ++i)
        X.push_back({m.train_X()(i, 0), m.train_X()(i, 1), m.train_X()(i, 2)});
    j["train_X"] = X;
    j["train_gamma"] = detail::to_json(m.train_gamma());
    j["constrained"] = m.constrained;
    j["eta"] = m.eta;
    json V = json::array();
    for (const auto& v : m.virtual_points) V.push_back({v[0], v[1], v[2]});
    j["virtual_points"] = V;
    j["train_levels"] = m.train_levels;
    os << kModelHeader << '\n' << j.dump(1) << '\n';
}

inline void save_model(const GpModel& m, const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path.string());
    save_model(m, out);
}

/// Rebuilds the factorization caches from the stored training set.
inline GpModel load_model(std::istream& is, const std::string& name = "<stream>") {
    using detail::json;
    std::string header;
    std::getline(is, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != kModelHeader)
        throw VersionError("model " + name + ": expected header " + kModelHeader + ", found '" + header + "'");
    try {
        const json j = json::parse(is);
        const auto& h = j.at("hyperparameters");
        Hyperparameters th;
        for (int k = 0; k < 3; ++k) th.ell[k] = h.at("ell").at(static_cast<std::size_t>(k)).get<double>();
        th.sigma_f = h.at("sigma_f").get<double>();
        th.sigma_n = h.at("sigma_n").get<double>();
        const auto& nj = j.at("normalization");
        Normalization norm;
        norm.input = {detail::affine_from(nj.at("eps_v")), detail::affine_from(nj.at("eps_s")),
                      detail::affine_from(nj.at("p"))};
        norm.output = detail::affine_from(nj.at("gamma"));
        MeanFunction mean;
        if (!j.at("mean").is_null()) mean = detail::polymean_from(j.at("mean"));
        const auto& xs = j.at("train_X");
        Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), 3);
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t k = 0; k < 3; ++k) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = xs.at(i).at(k).get<double>();
        GpModel m(X, detail::vector_from(j.at("train_gamma")), th, mean, norm);
        m.constrained = j.at("constrained").get<bool>();
        m.eta = j.at("eta").get<double>();
        for (const auto& v : j.at("virtual_points"))
            m.virtual_points.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
        m.train_levels = j.at("train_levels").get<std::vector<double>>();
        return m;
    } catch (const json::exception& e) {
        throw DataError("model " + name + ": malformed artifact: " + e.what());
    }
}

inline GpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("model file not found: " + path.string());
    return load_model(in, path.string());
}

// KCC parameter files are JSON objects:
//   {"a": {"yield": [a0,a1,a2], "max": [...], "residual": [...]},
//    "b1":..., "b2":..., "f_t":..., "lambda_m":..., "eta_table": [[l,e],...],
//    "varpi":..., "E":..., "nu":..., "r_f": 1}
// Keys starting with '_' are comments. Missing keys keep their defaults.

inline KccParams kcc_params_from_json(const nlohmann::json& j) {
    KccParams k;
    if (!j.is_object()) throw ConfigError("kcc params: top level must be an object");
    auto number = [](const nlohmann::json& v, const std::string& path) {
        if (!v.is_number()) throw ConfigError("kcc params: " + path + " must be a number");
        return v.get<double>();
    };
    bool table_given = false;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const auto& v = it.value();
        if (!key.empty() && key.front() == '_') continue;
        if (key == "a") {
            if (!v.is_object()) throw ConfigError("kcc params: a must be an object");
            static const char* names[] = {"yield", "max", "residual"};
            for (auto jt = v.begin(); jt != v.end(); ++jt) {
                int idx = -1;
                for (int s = 0; s < 3; ++s)
                    if (jt.key() == names[s]) idx = s;
                if (idx < 0) throw ConfigError("kcc params: unknown key a." + jt.key());
                if (!jt.value().is_array() || jt.value().size() != 3)
                    throw ConfigError("kcc params: a." + jt.key() + " must be [a0, a1, a2]");
                for (std::size_t c = 0; c < 3; ++c)
                    k.a[static_cast<std::size_t>(idx)][c] =
                        number(jt.value()[c], "a." + jt.key() + "[" + std::to_string(c) + "]");
            }
        } else if (key == "eta_table") {
            if (!v.is_array()) throw ConfigError("kcc params: eta_table must be a list of [lambda, eta]");
            k.eta_table.clear();
            for (std::size_t r = 0; r < v.size(); ++r) {
                const std::string p = "eta_table[" + std::to_string(r) + "]";
                if (!v[r].is_array() || v[r].size() != 2) throw ConfigError("kcc params: " + p + " must be [lambda, eta]");
                k.eta_table.emplace_back(number(v[r][0], p + "[0]"), number(v[r][1], p + "[1]"));
            }
            table_given = true;
        } else if (key == "b1") k.b1 = number(v, key);
        else if (key == "b2") k.b2 = number(v, key);
        else if (key == "f_t") k.f_t = number(v, key);
        else if (key == "lambda_m") k.lambda_m = number(v, key);
        else if (key == "varpi") k.varpi = number(v, key);
        else if (key == "E") k.E = number(v, key);
        else if (key == "nu") k.nu = number(v, key);
        else if (key == "r_f") k.r_f = number(v, key);
        else throw ConfigError("kcc params: unknown key " + key);
    }
    if (!table_given) k.eta_table = KccParams::default_table(k.lambda_m);
    k.validate();
    return k;
}

inline nlohmann::json kcc_params_to_json(const KccParams& k) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& [l, e] : k.eta_table) t.push_back({l, e});
    return {{"a", {{"yield", k.a[0]}, {"max", k.a[1]}, {"residual", k.a[2]}}},
            {"b1", k.b1},
            {"b2", k.b2},
            {"f_t", k.f_t},
            {"lambda_m", k.lambda_m},
            {"eta_table", t},
            {"varpi", k.varpi},
            {"E", k.E},
            {"nu", k.nu},
            {"r_f", k.r_f}};
}

inline KccParams load_kcc_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open kcc params file: " + path.string());
    try {
        return kcc_params_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("kcc params " + path.string() + ": " + e.what());
    }
}

} // namespace cgpr
