#include "tscale/alpha_model.hpp"

#include <cmath>
#include <limits>

namespace tscale {

double ReferenceMaterial::mean_free_path() const {
    const double st = attenuation();
    return st > 0.0 ? 1.0 / st : std::numeric_limits<double>::infinity();
}

double modified_attenuation(const ReferenceMaterial& m, const AlphaParams& params) {
    params.validate();
    if (m.sigma_a < 0.0 || m.sigma_s < 0.0)
        throw std::domain_error("modified_attenuation: negative coefficient");
    return params.p * m.sigma_a + m.sigma_s;
}

AlphaValue alpha_from_coefficients(const ReferenceMaterial& m, const AlphaParams& params) {
    const double st = modified_attenuation(m, params);
    // -expm1 keeps precision for small optical thickness.
    const double a_hat = -std::expm1(-params.c * st);
    return {std::pow(a_hat, params.q)};
}

double attenuation_from_alpha(const AlphaValue& a, const AlphaParams& params, bool* clamped) {
    params.validate();
    if (a.a < 0.0 || a.a >= 1.0)
        throw std::domain_error("attenuation_from_alpha: A must be in [0,1)");
    double a_hat = std::pow(a.a, 1.0 / params.q);
    bool clip = false;
    if (a_hat > 1.0 - 1e-12) {
        a_hat = 1.0 - 1e-12;
        clip = true;
    }
    if (clamped) *clamped = clip;
    return -std::log1p(-a_hat) / params.c;
}

AlphaValue rescale_alpha(const AlphaValue& a, double k, double q) {
    if (a.a < 0.0 || a.a >= 1.0) throw std::domain_error("rescale_alpha: A must be in [0,1)");
    if (k <= 0.0) throw std::domain_error("rescale_alpha: scale factor must be > 0");
    if (q <= 0.0) throw std::domain_error("rescale_alpha: q must be > 0");
    const double a_hat = std::pow(a.a, 1.0 / q);
    return {std::pow(1.0 - std::pow(1.0 - a_hat, 1.0 / k), q)};
}

}  // namespace tscale
