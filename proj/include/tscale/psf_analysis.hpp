#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tscale {

// Isotropic point spread p(x) = exp(-c*|x|^2), c in mm^-2; c = 0 is no blur.
struct GaussianPsf {
    double c = 0.0;

    void validate() const {
        if (c < 0.0) throw std::domain_error("GaussianPsf: c must be >= 0");
    }
};

struct ApertureConfig {
    double a_d = 2.0;  // detection diameter, mm
    double a_i = 2.0;  // illumination diameter, mm

    void validate() const {
        if (a_d <= 0.0 || a_i <= 0.0)
            throw std::domain_error("ApertureConfig: apertures must be > 0");
    }
};

// Decay parameter whose Gaussian transfer function is 0.5 at the given
// frequency, converted from cycles/degree to cycles/mm on the sample plane.
GaussianPsf cpd_to_psf_param(double cycles_per_degree, double viewing_distance_cm);

// Simulated aperture reading: (1/pi) * integral over the detection disk of the
// illumination disk convolved with the PSF. Relative error below 1e-4.
double psf_measurement(const ApertureConfig& ap, const GaussianPsf& psf);

// Reading normalized by its own no-blur value, a factor in (0, 1].
double psf_measurement_factor(const ApertureConfig& ap, const GaussianPsf& psf);

// Lightness difference between the two normalized aperture readings of one
// PSF, the simulated edge-loss signal of a spectrophotometer.
double psf_edge_loss(const GaussianPsf& psf, const ApertureConfig& ap0,
                     const ApertureConfig& ap1);

struct DiscriminationMatrix {
    std::size_t n = 0;
    std::vector<double> edge_loss;      // per PSF
    std::vector<std::uint8_t> flags;    // row-major n*n, 1 = discriminable

    bool at(std::size_t i, std::size_t j) const { return flags[i * n + j] != 0; }
};

// Pairwise discriminability: |edge_loss_i - edge_loss_j| > threshold.
DiscriminationMatrix device_discrimination(const std::vector<GaussianPsf>& psfs,
                                           const ApertureConfig& ap0,
                                           const ApertureConfig& ap1,
                                           double threshold = 0.5);

// Radial frequency response table, linearly interpolated, clamped at the ends.
struct CsfTable {
    std::vector<double> cycles_per_degree;  // strictly increasing, >= 0
    std::vector<double> response;           // >= 0

    void validate() const;
    double sample(double cpd) const;
};

struct BlurCompareConfig {
    double stimulus_diameter_mm = 8.0;
    double viewing_distance_cm = 80.0;
    double pixel_pitch_mm = 0.05;
    int canvas = 512;  // square, power of two preferred

    void validate() const;
};

// Mean |L*| difference over stimulus pixels after blurring a disk stimulus
// with each PSF and applying the radial frequency response.
double hvs_blur_difference(const GaussianPsf& a, const GaussianPsf& b, const CsfTable& csf,
                           const BlurCompareConfig& cfg = {});

// CSV ingestion: header cycles_per_degree,response.
CsfTable read_csf_csv(std::istream& in, const std::string& source_name = "<stream>");
CsfTable read_csf_csv_file(const std::string& path);

}  // namespace tscale
