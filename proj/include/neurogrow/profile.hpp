#pragma once

#include <string>
#include <vector>

namespace neurogrow {

struct Quartiles {
    double q1 = 0.0;
    double q3 = 0.0;
    bool contains(double v) const noexcept { return v >= q1 && v <= q3; }
};

/// Morphometric statistics of one culture stage. Lengths in micrometres, angles in degrees.
struct ProfileRow {
    double div = 0.0;
    double theta_mu = 0.0;
    double theta_sigma = 0.0;
    Quartiles tau;
    Quartiles n_e;
    Quartiles l_seg;
    double l_total = 0.0;
};

class MorphometricProfile {
public:
    MorphometricProfile() = default;
    explicit MorphometricProfile(std::vector<ProfileRow> rows, std::string name = {});

    /// Rat hippocampal statistics, DIV 0.5 to 6.
    static MorphometricProfile builtin();
    static MorphometricProfile load(const std::string& path);
    static MorphometricProfile from_json_text(const std::string& text);
    /// The profile shipped in the data directory, or the built-in copy when it is absent.
    static MorphometricProfile default_profile();

    const std::vector<ProfileRow>& rows() const noexcept { return rows_; }
    const ProfileRow& row(int index) const { return rows_.at(index); }
    const ProfileRow& last() const { return rows_.back(); }
    int size() const noexcept { return int(rows_.size()); }
    const std::string& name() const noexcept { return name_; }
    /// Row index of a DIV value; ConfigError when it is not in the profile.
    int index_of(double div) const;

    std::string to_json_text() const;

private:
    std::vector<ProfileRow> rows_;
    std::string name_;
};

struct DivResult {
    int index = 0;  // row of the profile
    double div = 0.0;
    bool terminal = false;  // l_total beyond the last row
};

/// Smallest DIV whose l_total reaches the measured length (micrometres).
DivResult determine_div(double l_total, const MorphometricProfile& profile);

}  // namespace neurogrow
