#include "tscale/colorimetry.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace tscale {

namespace {

// CIE 1931 2-degree observer, 380-730 nm at 10 nm.
constexpr double kXBar[kSpectrumSamples] = {
    0.001368, 0.004243, 0.014310, 0.043510, 0.134380, 0.283900, 0.348280, 0.336200, 0.290800,
    0.195360, 0.095640, 0.032010, 0.004900, 0.009300, 0.063270, 0.165500, 0.290400, 0.433450,
    0.594500, 0.762100, 0.916300, 1.026300, 1.062200, 1.002600, 0.854450, 0.642400, 0.447900,
    0.283500, 0.164900, 0.087400, 0.046770, 0.022700, 0.011359, 0.005790, 0.002899, 0.001440};
constexpr double kYBar[kSpectrumSamples] = {
    0.000039, 0.000120, 0.000396, 0.001210, 0.004000, 0.011600, 0.023000, 0.038000, 0.060000,
    0.090980, 0.139020, 0.208020, 0.323000, 0.503000, 0.710000, 0.862000, 0.954000, 0.994950,
    0.995000, 0.952000, 0.870000, 0.757000, 0.631000, 0.503000, 0.381000, 0.265000, 0.175000,
    0.107000, 0.061000, 0.032000, 0.017000, 0.008210, 0.004102, 0.002091, 0.001047, 0.000520};
constexpr double kZBar[kSpectrumSamples] = {
    0.006450, 0.020050, 0.067850, 0.207400, 0.645600, 1.385600, 1.747060, 1.772110, 1.669200,
    1.287640, 0.812950, 0.465180, 0.272000, 0.158200, 0.078250, 0.042160, 0.020300, 0.008750,
    0.003900, 0.002100, 0.001650, 0.001100, 0.000800, 0.000340, 0.000190, 0.000050, 0.000020,
    0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.000000};

// Relative spectral power distributions (linear resampling of the published
// 5 nm tables; 100 at 560 nm).
constexpr double kD50[kSpectrumSamples] = {
    24.49,  29.87,  49.31,  56.51,  60.03,  57.82,  74.82,  87.25,  90.61,
    91.37,  95.11,  91.96,  95.72,  96.61,  97.13,  102.10, 100.75, 102.32,
    100.00, 97.74,  98.92,  93.50,  97.69,  99.27,  99.04,  95.72,  98.86,
    95.67,  98.19,  103.00, 99.13,  87.38,  91.60,  92.89,  76.85,  86.51};
constexpr double kD65[kSpectrumSamples] = {
    49.98,  54.65,  82.75,  91.49,  93.43,  86.68,  104.86, 117.01, 117.81,
    114.86, 115.92, 108.81, 109.35, 107.80, 104.79, 107.69, 104.41, 104.05,
    100.00, 96.33,  95.79,  88.69,  90.01,  89.60,  87.70,  83.29,  83.70,
    80.03,  80.21,  82.28,  78.28,  69.72,  71.61,  74.35,  61.60,  69.89};

double lab_f(double t) {
    constexpr double eps = 216.0 / 24389.0;   // (6/29)^3
    constexpr double kappa = 24389.0 / 27.0;  // (29/3)^3
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

double srgb_decode(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double srgb_encode(double v) {
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kSrgbToXyz = {{{0.4124564, 0.3575761, 0.1804375},
                              {0.2126729, 0.7151522, 0.0721750},
                              {0.0193339, 0.1191920, 0.9503041}}};
constexpr Mat3 kXyzToSrgb = {{{3.2404542, -1.5371385, -0.4985314},
                              {-0.9692660, 1.8760108, 0.0415560},
                              {0.0556434, -0.2040259, 1.0572252}}};

// Bradford cone response matrix and its inverse.
constexpr Mat3 kBradford = {{{0.8951, 0.2664, -0.1614},
                             {-0.7502, 1.7135, 0.0367},
                             {0.0389, -0.0685, 1.0296}}};
constexpr Mat3 kBradfordInv = {{{0.9869929, -0.1470543, 0.1599627},
                                {0.4323053, 0.5183603, 0.0492912},
                                {-0.0085287, 0.0400428, 0.9684867}}};

std::array<double, 3> mul(const Mat3& m, const std::array<double, 3>& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

}  // namespace

Spectrum Spectrum::constant(double v) {
    Spectrum s;
    s.values.fill(v);
    return s;
}

const Spectrum& cie_d50() {
    static const Spectrum s = [] {
        Spectrum r;
        for (int i = 0; i < kSpectrumSamples; ++i) r.values[i] = kD50[i];
        return r;
    }();
    return s;
}

const Spectrum& cie_d65() {
    static const Spectrum s = [] {
        Spectrum r;
        for (int i = 0; i < kSpectrumSamples; ++i) r.values[i] = kD65[i];
        return r;
    }();
    return s;
}

const std::array<Spectrum, 3>& cie_1931_observer() {
    static const std::array<Spectrum, 3> obs = [] {
        std::array<Spectrum, 3> o;
        for (int i = 0; i < kSpectrumSamples; ++i) {
            o[0].values[i] = kXBar[i];
            o[1].values[i] = kYBar[i];
            o[2].values[i] = kZBar[i];
        }
        return o;
    }();
    return obs;
}

ColorXYZ illuminant_white(const Spectrum& illuminant) {
    return spectrum_to_xyz(Spectrum::constant(1.0), illuminant);
}

ColorXYZ spectrum_to_xyz(const Spectrum& s, const Spectrum& illuminant,
                         const std::array<Spectrum, 3>& observer) {
    double x = 0.0, y = 0.0, z = 0.0, norm = 0.0;
    for (int i = 0; i < kSpectrumSamples; ++i) {
        const double w = illuminant.values[i];
        x += w * observer[0].values[i] * s.values[i];
        y += w * observer[1].values[i] * s.values[i];
        z += w * observer[2].values[i] * s.values[i];
        norm += w * observer[1].values[i];
    }
    if (norm <= 0.0) throw std::domain_error("spectrum_to_xyz: illuminant has zero luminance");
    const double k = 100.0 / norm;
    return {k * x, k * y, k * z};
}

ColorLab xyz_to_lab(const ColorXYZ& c, const ColorXYZ& white) {
    if (white.X <= 0.0 || white.Y <= 0.0 || white.Z <= 0.0)
        throw std::domain_error("xyz_to_lab: non-positive white point");
    const double fx = lab_f(c.X / white.X);
    const double fy = lab_f(c.Y / white.Y);
    const double fz = lab_f(c.Z / white.Z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double factor_to_lightness(double y) {
    if (y < 0.0) throw std::domain_error("factor_to_lightness: negative factor");
    return 116.0 * lab_f(y) - 16.0;
}

ColorXYZ srgb_to_xyz(const ColorRGB& c) {
    if (c.r < 0.0 || c.r > 1.0 || c.g < 0.0 || c.g > 1.0 || c.b < 0.0 || c.b > 1.0)
        throw std::domain_error("srgb_to_xyz: channel out of [0,1]");
    const std::array<double, 3> lin = {srgb_decode(c.r), srgb_decode(c.g), srgb_decode(c.b)};
    const auto xyz = mul(kSrgbToXyz, lin);
    return {100.0 * xyz[0], 100.0 * xyz[1], 100.0 * xyz[2]};
}

ColorRGB xyz_to_srgb(const ColorXYZ& c, bool* clamped) {
    const auto lin = mul(kXyzToSrgb, {c.X / 100.0, c.Y / 100.0, c.Z / 100.0});
    bool clip = false;
    ColorRGB out;
    double* chan[3] = {&out.r, &out.g, &out.b};
    for (int i = 0; i < 3; ++i) {
        double v = lin[i];
        if (v < 0.0) {
            v = 0.0;
            clip = true;
        } else if (v > 1.0) {
            v = 1.0;
            clip = true;
        }
        *chan[i] = srgb_encode(v);
    }
    if (clamped) *clamped = clip;
    return out;
}

ColorXYZ adapt_white(const ColorXYZ& c, const ColorXYZ& src_white, const ColorXYZ& dst_white) {
    const auto src = mul(kBradford, {src_white.X, src_white.Y, src_white.Z});
    const auto dst = mul(kBradford, {dst_white.X, dst_white.Y, dst_white.Z});
    auto rho = mul(kBradford, {c.X, c.Y, c.Z});
    for (int i = 0; i < 3; ++i) rho[i] *= dst[i] / src[i];
    const auto out = mul(kBradfordInv, rho);
    return {out[0], out[1], out[2]};
}

ColorXYZ d50_white() { return {96.422, 100.0, 82.521}; }
ColorXYZ d65_white() { return {95.047, 100.0, 108.883}; }

double srgb_lightness_d50(const ColorRGB& c) {
    const ColorXYZ d65 = srgb_to_xyz(c);
    const ColorXYZ d50 = adapt_white(d65, d65_white(), d50_white());
    return xyz_to_lab(d50, d50_white()).L;
}

Spectrum read_spectrum_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(source_name + ":1: empty spectrum file");
    Spectrum s;
    for (int i = 0; i < kSpectrumSamples; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error(source_name + ":" + std::to_string(i + 2) +
                                     ": expected 36 samples, file truncated");
        std::istringstream row(line);
        std::string wl_str, val_str;
        if (!std::getline(row, wl_str, ',') || !std::getline(row, val_str))
            throw std::runtime_error(source_name + ":" + std::to_string(i + 2) +
                                     ": expected wavelength_nm,value");
        const double wl = std::stod(wl_str);
        const double expect = kLambdaMinNm + i * kLambdaStepNm;
        if (std::abs(wl - expect) > 1e-9)
            throw std::runtime_error(source_name + ":" + std::to_string(i + 2) +
                                     ": wavelength " + wl_str + ", expected " +
                                     std::to_string(static_cast<int>(expect)));
        const double v = std::stod(val_str);
        if (v < 0.0)
            throw std::runtime_error(source_name + ":" + std::to_string(i + 2) +
                                     ": negative factor");
        s.values[i] = v;
    }
    return s;
}

Spectrum read_spectrum_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open spectrum file: " + path);
    return read_spectrum_csv(in, path);
}

}  // namespace tscale
