#include "neurogrow/profile.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "neurogrow/grid.hpp"

namespace neurogrow {

using nlohmann::json;

MorphometricProfile::MorphometricProfile(std::vector<ProfileRow> rows, std::string name)
    : rows_(std::move(rows)), name_(std::move(name)) {
    if (rows_.empty()) throw ConfigError("profile has no rows");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.tau.q1 > r.tau.q3 || r.n_e.q1 > r.n_e.q3 || r.l_seg.q1 > r.l_seg.q3)
            throw ConfigError("profile row " + std::to_string(i) + ": Q1 exceeds Q3");
        if (r.theta_sigma < 0.0) throw ConfigError("profile row " + std::to_string(i) + ": negative sigma");
        if (i > 0 && !(r.div > rows_[i - 1].div && r.l_total > rows_[i - 1].l_total))
            throw ConfigError("profile DIV and l_total must increase strictly");
    }
}

MorphometricProfile MorphometricProfile::builtin() {
    return MorphometricProfile(
        {
            {0.5, 22.18, 11.65, {1.0225, 1.0776}, {1, 2.5}, {5.05, 7.82}, 27.53},
            {1.0, 22.82, 10.82, {1.0161, 1.0757}, {1, 3}, {5.58, 8.36}, 36.54},
            {1.5, 21.34, 9.69, {1.0254, 1.0507}, {1, 4}, {5.64, 9.39}, 53.19},
            {2.0, 22.32, 8.01, {1.0283, 1.0685}, {1, 4}, {6.39, 10.35}, 84.34},
            {3.0, 22.88, 6.78, {1.0300, 1.0725}, {2, 6}, {8.35, 10.95}, 155.13},
            {4.0, 21.28, 4.91, {1.0341, 1.0623}, {3, 7}, {6.65, 10.86}, 218.74},
            {6.0, 20.32, 2.65, {1.0302, 1.0498}, {6, 10}, {10.24, 12.36}, 554.73},
        },
        "rat hippocampal, DIV 0.5 to 6");
}

namespace {

Quartiles quartiles(const json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string("profile field ") + key + " must be [Q1, Q3]");
    return {a[0].get<double>(), a[1].get<double>()};
}

}  // namespace

MorphometricProfile MorphometricProfile::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
        std::vector<ProfileRow> rows;
        for (const auto& r : doc.at("rows")) {
            ProfileRow row;
            row.div = r.at("div").get<double>();
            const auto& th = r.at("theta_t");
            row.theta_mu = th.at(0).get<double>();
            row.theta_sigma = th.at(1).get<double>();
            row.tau = quartiles(r, "tau");
            row.n_e = quartiles(r, "n_e");
            row.l_seg = quartiles(r, "l_seg");
            row.l_total = r.at("l_total").get<double>();
            rows.push_back(row);
        }
        return MorphometricProfile(std::move(rows), doc.value("name", std::string{}));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed profile: ") + e.what());
    }
}

MorphometricProfile MorphometricProfile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

MorphometricProfile MorphometricProfile::default_profile() {
    const std::filesystem::path p = std::filesystem::path(NEUROGROW_DATA_DIR) / "rat_hippocampal_profile.json";
    if (std::filesystem::exists(p)) return load(p.string());
    return builtin();
}

int MorphometricProfile::index_of(double div) const {
    for (int i = 0; i < size(); ++i)
        if (rows_[i].div == div) return i;
    throw ConfigError("DIV " + std::to_string(div) + " is not in the profile");
}

std::string MorphometricProfile::to_json_text() const {
    json doc;
    doc["name"] = name_;
    for (const auto& r : rows_) {
        doc["rows"].push_back({{"div", r.div},
                               {"theta_t", {r.theta_mu, r.theta_sigma}},
                               {"tau", {r.tau.q1, r.tau.q3}},
                               {"n_e", {r.n_e.q1, r.n_e.q3}},
                               {"l_seg", {r.l_seg.q1, r.l_seg.q3}},
                               {"l_total", r.l_total}});
    }
    return doc.dump(2);
}

DivResult determine_div(double l_total, const MorphometricProfile& profile) {
    if (!(l_total >= 0.0)) throw DomainError("l_total must be nonnegative");
    for (int i = 0; i < profile.size(); ++i) {
        if (profile.row(i).l_total >= l_total) return {i, profile.row(i).div, false};
    }
    return {profile.size() - 1, profile.last().div, true};
}

}  // namespace neurogrow
