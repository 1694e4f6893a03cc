#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace tscale {

// Spectral lattice used throughout: 380..730 nm in 10 nm steps.
inline constexpr int kSpectrumSamples = 36;
inline constexpr double kLambdaMinNm = 380.0;
inline constexpr double kLambdaStepNm = 10.0;

// Reflectance or transmittance factors on the 380-730/10 nm lattice.
struct Spectrum {
    std::array<double, kSpectrumSamples> values{};

    static Spectrum constant(double v);
    double& operator[](int i) { return values[i]; }
    double operator[](int i) const { return values[i]; }
};

struct ColorXYZ {
    double X = 0.0, Y = 0.0, Z = 0.0;  // Y = 100 for the perfect reflecting diffuser
};

struct ColorLab {
    double L = 0.0, a = 0.0, b = 0.0;
};

struct ColorRGB {
    double r = 0.0, g = 0.0, b = 0.0;  // nonlinear sRGB, each in [0,1]
};

// Embedded standard tables, resampled to the 10 nm lattice.
const Spectrum& cie_d50();
const Spectrum& cie_d65();
// CIE 1931 2-degree color matching functions.
const std::array<Spectrum, 3>& cie_1931_observer();

// White point of an illuminant under the 1931 observer (Y = 100).
ColorXYZ illuminant_white(const Spectrum& illuminant);

// Weighted summation over the lattice, normalized so a unit spectrum gives Y = 100.
ColorXYZ spectrum_to_xyz(const Spectrum& s, const Spectrum& illuminant,
                         const std::array<Spectrum, 3>& observer = cie_1931_observer());

ColorLab xyz_to_lab(const ColorXYZ& c, const ColorXYZ& white);

// CIELAB lightness of a flat spectrum with the given factor (illuminant cancels).
double factor_to_lightness(double y);

ColorXYZ srgb_to_xyz(const ColorRGB& c);
// Inverse transform; out-of-gamut results are clamped to [0,1].
// When `clamped` is non-null it is set iff any channel was clamped.
ColorRGB xyz_to_srgb(const ColorXYZ& c, bool* clamped = nullptr);

// Linear Bradford adaptation between white points (XYZ with Y = 100).
ColorXYZ adapt_white(const ColorXYZ& c, const ColorXYZ& src_white, const ColorXYZ& dst_white);

ColorXYZ d50_white();
ColorXYZ d65_white();

// CIELAB L* of an sRGB color re-referenced to the D50 measurement white.
double srgb_lightness_d50(const ColorRGB& c);

// CSV ingestion: header row, columns wavelength_nm,value, rows exactly 380,390,...,730.
Spectrum read_spectrum_csv(std::istream& in, const std::string& source_name = "<stream>");
Spectrum read_spectrum_csv_file(const std::string& path);

}  // namespace tscale
