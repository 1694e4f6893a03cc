#include "tscale/psf_analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>
#include <vector>

#include "tscale/colorimetry.hpp"

namespace tscale {

namespace {

constexpr double kPi = std::numbers::pi;

// exp(-z) * I0(z), stable for large arguments.
double bessel_i0_scaled(double z) {
    if (z < 3.75) {
        const double t = (z / 3.75) * (z / 3.75);
        const double i0 =
            1.0 + t * (3.5156229 +
                       t * (3.0899424 +
                            t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
        return i0 * std::exp(-z);
    }
    const double u = 3.75 / z;
    const double s =
        0.39894228 +
        u * (0.01328592 +
             u * (0.00225319 +
                  u * (-0.00157565 +
                       u * (0.00916281 +
                            u * (-0.02057706 +
                                 u * (0.02635537 + u * (-0.01647633 + u * 0.00392377)))))));
    return s / std::sqrt(z);
}

struct GaussNodes {
    std::vector<double> x, w;  // on [-1, 1]
};

const GaussNodes& gauss_32() {
    static const GaussNodes nodes = [] {
        constexpr int n = 32;
        GaussNodes g;
        g.x.resize(n);
        g.w.resize(n);
        for (int i = 0; i < n; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            g.x[i] = x;
            g.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        return g;
    }();
    return nodes;
}

// Composite 32-point Gauss-Legendre over [a, b].
template <class F>
double integrate(const F& f, double a, double b, int panels) {
    if (b <= a) return 0.0;
    const GaussNodes& g = gauss_32();
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        double s = 0.0;
        for (std::size_t i = 0; i < g.x.size(); ++i)
            s += g.w[i] * f(lo + 0.5 * h * (g.x[i] + 1.0));
        total += 0.5 * h * s;
    }
    return total;
}

}  // namespace

GaussianPsf cpd_to_psf_param(double cycles_per_degree, double viewing_distance_cm) {
    if (cycles_per_degree < 0.0) throw std::domain_error("cpd_to_psf_param: frequency < 0");
    if (viewing_distance_cm <= 0.0)
        throw std::domain_error("cpd_to_psf_param: distance must be > 0");
    const double mm_per_degree = 10.0 * viewing_distance_cm * std::tan(kPi / 180.0);
    const double rho = cycles_per_degree / mm_per_degree;  // cycles/mm on the sample
    return {kPi * kPi * rho * rho / std::log(2.0)};
}

double psf_measurement(const ApertureConfig& ap, const GaussianPsf& psf) {
    ap.validate();
    psf.validate();
    const double r_d = 0.5 * ap.a_d;
    const double r_i = 0.5 * ap.a_i;
    if (psf.c == 0.0) return kPi * r_i * r_i * r_d * r_d;

    const double c = psf.c;
    const double window = std::sqrt(40.0 / c);  // integrand support around s = r
    auto blurred_disk = [&](double r) {
        const double lo = std::max(0.0, r - window);
        const double hi = std::min(r_i, r + window);
        auto inner = [&](double s) {
            const double d = r - s;
            return s * std::exp(-c * d * d) * bessel_i0_scaled(2.0 * c * r * s);
        };
        return 2.0 * kPi * integrate(inner, lo, hi, 8);
    };
    return 2.0 * integrate([&](double r) { return r * blurred_disk(r); }, 0.0, r_d, 8);
}

double psf_measurement_factor(const ApertureConfig& ap, const GaussianPsf& psf) {
    return psf_measurement(ap, psf) / psf_measurement(ap, GaussianPsf{0.0});
}

double psf_edge_loss(const GaussianPsf& psf, const ApertureConfig& ap0,
                     const ApertureConfig& ap1) {
    const double l0 = factor_to_lightness(psf_measurement_factor(ap0, psf));
    const double l1 = factor_to_lightness(psf_measurement_factor(ap1, psf));
    return std::abs(l1 - l0);
}

DiscriminationMatrix device_discrimination(const std::vector<GaussianPsf>& psfs,
                                           const ApertureConfig& ap0, const ApertureConfig& ap1,
                                           double threshold) {
    if (psfs.size() < 2)
        throw std::invalid_argument("device_discrimination: need >= 2 point spreads");
    if (threshold < 0.0)
        throw std::domain_error("device_discrimination: threshold must be >= 0");
    DiscriminationMatrix m;
    m.n = psfs.size();
    m.edge_loss.resize(m.n);
    for (std::size_t i = 0; i < m.n; ++i) m.edge_loss[i] = psf_edge_loss(psfs[i], ap0, ap1);
    m.flags.assign(m.n * m.n, 0);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j)
            m.flags[i * m.n + j] =
                std::abs(m.edge_loss[i] - m.edge_loss[j]) > threshold ? 1 : 0;
    return m;
}

void CsfTable::validate() const {
    if (cycles_per_degree.empty() || cycles_per_degree.size() != response.size())
        throw std::invalid_argument("CsfTable: empty or mismatched columns");
    for (std::size_t i = 0; i < cycles_per_degree.size(); ++i) {
        if (cycles_per_degree[i] < 0.0 || response[i] < 0.0)
            throw std::invalid_argument("CsfTable: negative entry");
        if (i > 0 && cycles_per_degree[i] <= cycles_per_degree[i - 1])
            throw std::invalid_argument("CsfTable: frequencies must be strictly increasing");
    }
}

double CsfTable::sample(double cpd) const {
    if (cpd <= cycles_per_degree.front()) return response.front();
    if (cpd >= cycles_per_degree.back()) return response.back();
    const auto it =
        std::upper_bound(cycles_per_degree.begin(), cycles_per_degree.end(), cpd);
    const std::size_t i = static_cast<std::size_t>(it - cycles_per_degree.begin());
    const double t =
        (cpd - cycles_per_degree[i - 1]) / (cycles_per_degree[i] - cycles_per_degree[i - 1]);
    return response[i - 1] + t * (response[i] - response[i - 1]);
}

void BlurCompareConfig::validate() const {
    if (stimulus_diameter_mm <= 0.0 || viewing_distance_cm <= 0.0 || pixel_pitch_mm <= 0.0 ||
        canvas < 16)
        throw std::invalid_argument("BlurCompareConfig: invalid field");
    if (stimulus_diameter_mm / pixel_pitch_mm > 0.8 * canvas)
        throw std::invalid_argument("BlurCompareConfig: stimulus does not fit the canvas");
}

namespace {

// Separable Gaussian blur matching exp(-c r^2), zero padding at the borders.
void blur_image(std::vector<double>& img, int n, double c, double pitch_mm) {
    if (c == 0.0) return;
    const int k_max = std::max(1, static_cast<int>(std::ceil(std::sqrt(30.0 / c) / pitch_mm)));
    std::vector<double> kernel(2 * k_max + 1);
    double sum = 0.0;
    for (int k = -k_max; k <= k_max; ++k) {
        const double d = k * pitch_mm;
        sum += kernel[k + k_max] = std::exp(-c * d * d);
    }
    for (double& w : kernel) w /= sum;

    std::vector<double> tmp(img.size(), 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            for (int k = -k_max; k <= k_max; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < n) s += kernel[k + k_max] * img[y * n + xx];
            }
            tmp[y * n + x] = s;
        }
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
            double s = 0.0;
            for (int k = -k_max; k <= k_max; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < n) s += kernel[k + k_max] * tmp[yy * n + x];
            }
            img[y * n + x] = s;
        }
}

void csf_filter(std::vector<double>& img, int n, const CsfTable& csf, double pitch_mm,
                double distance_cm) {
    const int nc = n / 2 + 1;
    std::vector<fftw_complex> spec(static_cast<std::size_t>(n) * nc);
    fftw_plan fwd = fftw_plan_dft_r2c_2d(n, n, img.data(), spec.data(), FFTW_ESTIMATE);
    fftw_execute(fwd);
    fftw_destroy_plan(fwd);

    const double mm_per_degree = 10.0 * distance_cm * std::tan(kPi / 180.0);
    for (int ky = 0; ky < n; ++ky) {
        const double fy = (ky <= n / 2 ? ky : ky - n) / (n * pitch_mm);
        for (int kx = 0; kx < nc; ++kx) {
            const double fx = kx / (n * pitch_mm);
            const double f_cpd = std::sqrt(fx * fx + fy * fy) * mm_per_degree;
            const double g = csf.sample(f_cpd) / (static_cast<double>(n) * n);
            spec[static_cast<std::size_t>(ky) * nc + kx][0] *= g;
            spec[static_cast<std::size_t>(ky) * nc + kx][1] *= g;
        }
    }
    fftw_plan bwd = fftw_plan_dft_c2r_2d(n, n, spec.data(), img.data(), FFTW_ESTIMATE);
    fftw_execute(bwd);
    fftw_destroy_plan(bwd);
}

}  // namespace

double hvs_blur_difference(const GaussianPsf& a, const GaussianPsf& b, const CsfTable& csf,
                           const BlurCompareConfig& cfg) {
    a.validate();
    b.validate();
    csf.validate();
    cfg.validate();

    const int n = cfg.canvas;
    const double r_px = 0.5 * cfg.stimulus_diameter_mm / cfg.pixel_pitch_mm;
    std::vector<double> img_a(static_cast<std::size_t>(n) * n, 0.0);
    const double cx = 0.5 * (n - 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double dx = x - cx, dy = y - cx;
            if (dx * dx + dy * dy <= r_px * r_px) img_a[static_cast<std::size_t>(y) * n + x] = 1.0;
        }
    std::vector<double> img_b = img_a;

    blur_image(img_a, n, a.c, cfg.pixel_pitch_mm);
    blur_image(img_b, n, b.c, cfg.pixel_pitch_mm);

    // Support mask taken before frequency filtering; ringing would otherwise
    // spread the mask over the whole canvas.
    std::vector<char> mask(img_a.size());
    for (std::size_t i = 0; i < img_a.size(); ++i)
        mask[i] = img_a[i] > 1e-12 || img_b[i] > 1e-12;

    csf_filter(img_a, n, csf, cfg.pixel_pitch_mm, cfg.viewing_distance_cm);
    csf_filter(img_b, n, csf, cfg.pixel_pitch_mm, cfg.viewing_distance_cm);

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < img_a.size(); ++i) {
        if (!mask[i]) continue;
        const double la = factor_to_lightness(std::clamp(img_a[i], 0.0, 1.0));
        const double lb = factor_to_lightness(std::clamp(img_b[i], 0.0, 1.0));
        sum += std::abs(la - lb);
        ++count;
    }
    if (count == 0) throw std::runtime_error("hvs_blur_difference: empty stimulus");
    return sum / static_cast<double>(count);
}

CsfTable read_csf_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    auto chomp = [](std::string s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
        return s;
    };
    if (!std::getline(in, line) || chomp(line) != "cycles_per_degree,response")
        throw std::runtime_error(source_name + ": expected header cycles_per_degree,response");
    CsfTable t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = chomp(line);
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b))
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": expected cycles_per_degree,response");
        try {
            std::size_t p1, p2;
            t.cycles_per_degree.push_back(std::stod(a, &p1));
            t.response.push_back(std::stod(b, &p2));
            if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": malformed number");
        }
    }
    t.validate();
    return t;
}

CsfTable read_csf_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_csf_csv(in, path);
}

}  // namespace tscale
