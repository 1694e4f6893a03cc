#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscale/alpha_model.hpp"
#include "tscale/colorimetry.hpp"
#include "tscale/material_table.hpp"

namespace tscale {

struct MeasuredSample {
    double L_R_m = 0.0;   // reflectance lightness, white backing
    double L_T_m = 0.0;   // transmittance lightness relative to air
    double dL01_m = 0.0;  // edge-loss difference

    void validate() const {
        if (L_R_m < 0.0 || L_R_m > 100.0 || L_T_m < 0.0 || L_T_m > 100.0)
            throw std::domain_error("MeasuredSample: lightness out of [0,100]");
        if (dL01_m < 0.0) throw std::domain_error("MeasuredSample: negative edge-loss difference");
    }
};

struct MeasureResult {
    double sigma_a_m = 0.0;
    double sigma_s_m = 0.0;
    AlphaValue alpha;
    double objective = 0.0;         // squared 2-norm residual of (L_T, dL01)
    double constraint_slack = 0.0;  // |L_R_m - L_R(sigma_a, sigma_s)|
};

// No lattice point satisfies the lightness constraint; carries the point with
// the smallest constraint slack.
class infeasible_error : public std::runtime_error {
public:
    infeasible_error(std::string msg, MeasureResult best)
        : std::runtime_error(std::move(msg)), best_slack_point_(best) {}
    const MeasureResult& best_slack_point() const { return best_slack_point_; }

private:
    MeasureResult best_slack_point_;
};

enum class ScanMode {
    exhaustive,  // parallel blocked scan of every lattice point
    pruned       // exact cell-bound pruning; result identical to exhaustive
};

struct MeasureOptions {
    double d = 2.0;             // lightness acceptance threshold
    double lattice_step = 0.1;  // cm^-1
    AlphaParams params;
    int n_threads = 1;
    ScanMode mode = ScanMode::exhaustive;
};

// Minimizes the squared (L_T, dL01) residual over the 0.1 cm^-1 lattice of the
// table's coefficient range subject to |L_R_m - L_R| <= d. Ties break toward
// smaller modified attenuation, then smaller sigma_a, then lower lattice index.
MeasureResult measure_alpha(const MeasuredSample& m, const MaterialTable& table,
                            const MeasureOptions& opts = {});

struct InverseLutEntry {
    double sigma_a = 0.0;
    double sigma_s = 0.0;
    double lightness = 0.0;  // L_R achieved at the stored point
    bool populated = false;  // iso-A curve attains the lightness level within half a step
};

// Quantized (A level, reflectance lightness level) -> (sigma_a, sigma_s) map.
class InverseLut {
public:
    InverseLut(int a_levels, double l_step, AlphaParams params)
        : a_levels_(a_levels), l_step_(l_step), params_(params),
          n_l_(static_cast<int>(100.0 / l_step) + 1),
          entries_(static_cast<std::size_t>(a_levels) * n_l_) {}

    int a_levels() const { return a_levels_; }
    int lightness_levels() const { return n_l_; }
    double l_step() const { return l_step_; }
    const AlphaParams& params() const { return params_; }

    double alpha_of_level(int i) const { return static_cast<double>(i) / (a_levels_ - 1); }
    const InverseLutEntry& entry(int a_level, int l_level) const {
        return entries_[static_cast<std::size_t>(a_level) * n_l_ + l_level];
    }
    InverseLutEntry& entry(int a_level, int l_level) {
        return entries_[static_cast<std::size_t>(a_level) * n_l_ + l_level];
    }

private:
    int a_levels_;
    double l_step_;
    AlphaParams params_;
    int n_l_;
    std::vector<InverseLutEntry> entries_;
};

InverseLut build_inverse_lut(const MaterialTable& table, const AlphaParams& params = {},
                             int a_levels = 256, double l_step = 0.1);

struct RetrieveInfo {
    double lightness_distance = 0.0;  // |requested - stored| lightness
    bool exact_level = false;         // the requested lightness level was populated
};

// Constant-time retrieval of the reference material for an RGBA value: the
// stored iso-A point with the smallest lightness difference to the RGB
// lightness. Nearest populated entry is used when the exact level is empty.
ReferenceMaterial retrieve_reference_material(const ColorRGB& rgb, const AlphaValue& a,
                                              const InverseLut& lut,
                                              RetrieveInfo* info = nullptr);

// Measurement ingestion: CSV with columns block,wavelength_nm,value and four
// blocks labeled reflectance_white, reflectance_a0_black, reflectance_a1_black,
// transmittance, each on the 380-730/10 lattice.
MeasuredSample read_measurement_csv(std::istream& in, const std::string& source_name = "<stream>");
MeasuredSample read_measurement_csv_file(const std::string& path);

}  // namespace tscale
