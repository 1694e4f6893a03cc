#pragma once

#include <cstdint>
#include <optional>

#include "tscale/alpha_model.hpp"
#include "tscale/colorimetry.hpp"

namespace tscale {

// Laterally infinite slab sample. The top face lies at z = 0, the rear face at
// z = thickness; illumination arrives from z < 0.
struct SlabSample {
    ReferenceMaterial material;
    double thickness = 0.4;          // cm
    double refractive_index = 1.3;   // 1.0 disables the interface
    // Per-band absorption for colored samples; sigma_s stays wavelength-independent.
    std::optional<Spectrum> spectral_absorption;
};

enum class GeometryMode {
    reflectance_45_0,         // circular 45/0 with selectable backing
    transmittance_d0,         // diffuse illumination, detection along the normal
    transmittance_collimated  // normal collimated beam variant for validation
};

enum class Backing { black, white, none };

struct MeasurementGeometry {
    GeometryMode mode = GeometryMode::reflectance_45_0;
    double illumination_diameter_mm = 2.0;
    double detection_diameter_mm = 2.0;
    Backing backing = Backing::none;
    double detection_half_angle_deg = 5.0;
    double backing_white_factor = 0.92;  // Lambertian reflectance of the white backing

    static MeasurementGeometry reflectance_a0(Backing b);  // a0 = 1   (2 mm / 2 mm)
    static MeasurementGeometry reflectance_a1(Backing b);  // a1 = 1/4 (2 mm / 8 mm)
    static MeasurementGeometry transmittance();

    void validate() const;
};

struct McEstimate {
    double value = 0.0;      // measurement factor relative to the reference
    double std_error = 0.0;
    std::uint64_t n_photons = 0;
    std::uint64_t seed = 0;
    // Weight bookkeeping before estimator normalization. `absorbed_weight`
    // carries the Russian-roulette balance so the three buckets sum exactly
    // to `launched_weight`.
    double launched_weight = 0.0;
    double reflected_weight = 0.0;
    double transmitted_weight = 0.0;
    double absorbed_weight = 0.0;
};

// Unpolarized Fresnel reflectance for a ray hitting the interface from the
// n_in side at the given cosine of the incidence angle. Returns 1 past the
// critical angle when n_in > n_out.
double fresnel_reflectance(double n_in, double n_out, double cos_theta);

// Runs one virtual measurement. Deterministic for fixed (seed, n_photons);
// the thread count does not change the result.
McEstimate simulate(const SlabSample& sample, const MeasurementGeometry& geom,
                    std::uint64_t n_photons, std::uint64_t seed, int n_threads = 1);

struct MeasurementTriple {
    double L_R = 0.0;   // reflectance lightness, white backing
    double L_T = 0.0;   // transmittance lightness relative to air
    double dL01 = 0.0;  // edge-loss difference |L0* - L1*|, black backing
};

struct TripleConfig {
    std::uint64_t n_photons = 100000;  // per individual measurement
    std::uint64_t seed = 1;
    double detection_half_angle_deg = 5.0;
    double backing_white_factor = 0.92;
    int n_threads = 1;
};

struct TripleEstimate {
    MeasurementTriple triple;
    // Standard errors of the three lightness components, propagated from the
    // factor estimates.
    double se_L_R = 0.0, se_L_T = 0.0, se_dL01 = 0.0;
    McEstimate refl_white, refl_a0_black, refl_a1_black, transmittance;
};

// The four measurements behind one triple: white-backing reflectance for L_R*,
// black-backing reflectance at both aperture conditions for the edge-loss
// difference, and d/0 transmittance for L_T*.
TripleEstimate simulate_triple(const SlabSample& sample, const TripleConfig& config);

}  // namespace tscale
