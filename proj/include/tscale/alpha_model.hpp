#pragma once

#include <stdexcept>

namespace tscale {

// Homogeneous reference material: wavelength-independent coefficients in cm^-1,
// refractive index 1.3 and an isotropic phase function (fixed by convention).
struct ReferenceMaterial {
    double sigma_a = 0.0;
    double sigma_s = 0.0;

    double attenuation() const { return sigma_a + sigma_s; }
    // Mean free path in cm; infinite for the fully transparent material.
    double mean_free_path() const;
};

inline constexpr double kReferenceRefractiveIndex = 1.3;

// Model constants (p, q, c). Defaults are the fitted values.
struct AlphaParams {
    double p = 0.4;     // absorption weight in the modified attenuation
    double q = 0.6;     // Stevens power-law exponent
    double c = 0.0153;  // scale constant, cm

    void validate() const {
        if (p < 0.0) throw std::domain_error("AlphaParams: p must be >= 0");
        if (q <= 0.0) throw std::domain_error("AlphaParams: q must be > 0");
        if (c <= 0.0) throw std::domain_error("AlphaParams: c must be > 0");
    }
};

struct AlphaValue {
    double a = 0.0;  // in [0,1)
};

// Modified attenuation p*sigma_a + sigma_s, cm^-1.
double modified_attenuation(const ReferenceMaterial& m, const AlphaParams& params = {});

// A = (1 - exp(-c * modified_attenuation))^q.
AlphaValue alpha_from_coefficients(const ReferenceMaterial& m, const AlphaParams& params = {});

// Analytic inverse: modified attenuation from A. Values within 1e-12 of 1 are
// clamped before inversion; `clamped` reports whether that happened.
double attenuation_from_alpha(const AlphaValue& a, const AlphaParams& params = {},
                              bool* clamped = nullptr);

// Print-size adjustment: A for coefficients divided by the scale factor k.
AlphaValue rescale_alpha(const AlphaValue& a, double k, double q = AlphaParams{}.q);

}  // namespace tscale
