#include "tscale/slab_mc.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tscale/rng.hpp"

namespace tscale {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRouletteThreshold = 1e-4;
constexpr double kRouletteSurvival = 0.1;
constexpr std::uint64_t kPhotonsPerRange = 16384;
constexpr long kMaxEventsPerPhoton = 20'000'000;

struct Vec3 {
    double x, y, z;
};

struct Tally {
    double detected_sum = 0.0;    // per-photon detected weight, summed
    double detected_sumsq = 0.0;  // squared per-photon detected weight, summed
    double launched = 0.0;
    double reflected = 0.0;
    double transmitted = 0.0;
    double absorbed = 0.0;

    void merge(const Tally& o) {
        detected_sum += o.detected_sum;
        detected_sumsq += o.detected_sumsq;
        launched += o.launched;
        reflected += o.reflected;
        transmitted += o.transmitted;
        absorbed += o.absorbed;
    }
};

// Precomputed run context shared by all photons.
struct RunContext {
    GeometryMode mode;
    Backing backing;
    double sigma_a, sigma_s, sigma_t;
    double thickness;
    double n;
    double r_illum;   // cm
    double r_detect;  // cm
    double backing_factor;

    double cos_cone_ext;   // external acceptance cone
    double sin2_cone_ext;
    double cos_cone_int;   // the same cone refracted into the medium
    double mu_bar;         // representative internal cosine for cone paths
    double p_iso_cone;     // isotropic scattering into the internal cone
    double p_lambert_cone; // cosine emission into the internal cone
    double t_exit_normal;  // Fresnel transmission leaving the slab near normal
    double baseline;       // detected fraction of the reference measurement
};

struct Photon {
    Vec3 pos;
    Vec3 dir;  // unit
    double w;
    long steps = 0;               // loop-guard counter
    bool cone_ballistic = false;  // unscattered and aimed inside the cone
    double detected = 0.0;
};

double sample_exp(Rng& rng, double sigma) {
    // 1 - u in (0,1] avoids log(0)
    return -std::log(1.0 - rng.next_double()) / sigma;
}

Vec3 sample_isotropic(Rng& rng) {
    const double mu = 2.0 * rng.next_double() - 1.0;
    const double phi = 2.0 * kPi * rng.next_double();
    const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    return {s * std::cos(phi), s * std::sin(phi), mu};
}

// Cosine-weighted direction in the upper hemisphere (positive z).
Vec3 sample_cosine_up(Rng& rng) {
    const double sin2 = rng.next_double();
    const double phi = 2.0 * kPi * rng.next_double();
    const double s = std::sqrt(sin2);
    return {s * std::cos(phi), s * std::sin(phi), std::sqrt(1.0 - sin2)};
}

// Next-event contribution of a scattering or backing event toward the detector.
void next_event(const RunContext& ctx, Photon& ph, double p_cone) {
    double dist;
    if (ctx.mode == GeometryMode::reflectance_45_0) {
        if (ph.pos.x * ph.pos.x + ph.pos.y * ph.pos.y > ctx.r_detect * ctx.r_detect) return;
        dist = ph.pos.z;
    } else {
        dist = ctx.thickness - ph.pos.z;
    }
    const double tau = ctx.sigma_t * dist / ctx.mu_bar;
    if (tau > 40.0) return;
    ph.detected += ph.w * p_cone * std::exp(-tau) * ctx.t_exit_normal;
}

bool roulette(Rng& rng, Photon& ph, Tally& tally) {
    if (ph.w >= kRouletteThreshold || ph.w <= 0.0) return ph.w > 0.0;
    if (rng.next_double() < kRouletteSurvival) {
        const double w_new = ph.w / kRouletteSurvival;
        tally.absorbed += ph.w - w_new;
        ph.w = w_new;
        return true;
    }
    tally.absorbed += ph.w;
    ph.w = 0.0;
    return false;
}

// Transport inside the medium until the photon terminates. The photon must
// already be inside the slab with a valid direction.
void trace(const RunContext& ctx, Photon& ph, Rng& rng, Tally& tally) {
    while (true) {
        if (++ph.steps > kMaxEventsPerPhoton) {
            tally.absorbed += ph.w;
            return;
        }
        // Distance to the next boundary along the current direction.
        double boundary;
        bool upward = ph.dir.z < 0.0;
        if (std::abs(ph.dir.z) < 1e-15) {
            boundary = 1e30;  // parallel to the faces
        } else {
            boundary = upward ? -ph.pos.z / ph.dir.z : (ctx.thickness - ph.pos.z) / ph.dir.z;
        }

        double step = boundary;
        bool collides = false;
        if (ctx.sigma_t > 0.0) {
            const double s = sample_exp(rng, ctx.sigma_t);
            if (s < boundary) {
                step = s;
                collides = true;
            }
        }
        ph.pos.x += step * ph.dir.x;
        ph.pos.y += step * ph.dir.y;
        ph.pos.z += step * ph.dir.z;

        if (collides) {
            ph.cone_ballistic = false;
            const double w_new = ph.w * (ctx.sigma_s / ctx.sigma_t);
            tally.absorbed += ph.w - w_new;
            ph.w = w_new;
            if (ph.w <= 0.0) return;
            next_event(ctx, ph, ctx.p_iso_cone);
            ph.dir = sample_isotropic(rng);
            if (!roulette(rng, ph, tally)) return;
            continue;
        }

        if (upward) {
            // Top face from inside.
            const double cos_i = -ph.dir.z;
            const double r = fresnel_reflectance(ctx.n, 1.0, cos_i);
            if (rng.next_double() < r) {
                ph.pos.z = 0.0;
                ph.dir.z = -ph.dir.z;
                continue;
            }
            tally.reflected += ph.w;
            return;
        }

        // Rear face.
        ph.pos.z = ctx.thickness;
        if (ctx.backing == Backing::black) {
            tally.absorbed += ph.w;
            return;
        }
        if (ctx.backing == Backing::white) {
            ph.cone_ballistic = false;
            const double w_new = ph.w * ctx.backing_factor;
            tally.absorbed += ph.w - w_new;
            ph.w = w_new;
            if (ph.w <= 0.0) return;
            // A cosine re-emission lands in the internal cone with probability
            // sin^2 of its half angle.
            next_event(ctx, ph, ctx.p_lambert_cone);
            const Vec3 d = sample_cosine_up(rng);
            ph.dir = {d.x, d.y, -d.z};  // re-emitted toward the top face
            if (!roulette(rng, ph, tally)) return;
            continue;
        }

        // No backing: Fresnel exit into air below.
        const double cos_i = ph.dir.z;
        const double r = fresnel_reflectance(ctx.n, 1.0, cos_i);
        if (rng.next_double() < r) {
            ph.dir.z = -ph.dir.z;
            continue;
        }
        tally.transmitted += ph.w;
        // Unscattered specular chain: the exit direction equals the entry
        // direction, which was sampled inside the acceptance cone.
        if (ph.cone_ballistic) ph.detected += ph.w;
        return;
    }
}

void run_photon_reflectance(const RunContext& ctx, Rng& rng, Tally& tally) {
    Photon ph;
    ph.w = 1.0;
    tally.launched += ph.w;
    const double r = ctx.r_illum * std::sqrt(rng.next_double());
    const double phi = 2.0 * kPi * rng.next_double();
    ph.pos = {r * std::cos(phi), r * std::sin(phi), 0.0};

    const double cos45 = std::sqrt(0.5);
    const double rf = fresnel_reflectance(1.0, ctx.n, cos45);
    if (rng.next_double() < rf) {
        tally.reflected += ph.w;  // specular, never inside the cone
        return;
    }
    const double sin_t = std::sqrt(0.5) / ctx.n;
    const double cos_t = std::sqrt(1.0 - sin_t * sin_t);
    ph.dir = {sin_t, 0.0, cos_t};
    ph.cone_ballistic = false;
    trace(ctx, ph, rng, tally);
    const double d = ph.detected / ctx.baseline;
    tally.detected_sum += d;
    tally.detected_sumsq += d * d;
}

double launch_transmittance(const RunContext& ctx, Rng& rng, Tally& tally, double w,
                            double sin2, bool in_cone) {
    Photon ph;
    ph.w = w;
    tally.launched += w;
    ph.pos = {0.0, 0.0, 0.0};
    ph.cone_ballistic = in_cone;
    const double cos_e = std::sqrt(1.0 - sin2);
    const double rf = fresnel_reflectance(1.0, ctx.n, cos_e);
    if (rng.next_double() < rf) {
        tally.reflected += ph.w;
        return 0.0;
    }
    const double phi = 2.0 * kPi * rng.next_double();
    const double sin_i = std::sqrt(sin2) / ctx.n;
    const double cos_i = std::sqrt(1.0 - sin_i * sin_i);
    ph.dir = {sin_i * std::cos(phi), sin_i * std::sin(phi), cos_i};
    trace(ctx, ph, rng, tally);
    return ph.detected;
}

void run_photon_transmittance_d0(const RunContext& ctx, Rng& rng, Tally& tally) {
    // The launch direction is stratified across the acceptance cone so the
    // ballistic channel is sampled exactly: a cosine-distributed direction
    // falls inside the cone with probability sin^2 of the cone half angle.
    const double s2c = ctx.sin2_cone_ext;
    double d = launch_transmittance(ctx, rng, tally, s2c, s2c * rng.next_double(), true);
    d += launch_transmittance(ctx, rng, tally, 1.0 - s2c,
                              s2c + (1.0 - s2c) * rng.next_double(), false);
    d /= ctx.baseline;
    tally.detected_sum += d;
    tally.detected_sumsq += d * d;
}

void run_photon_transmittance_collimated(const RunContext& ctx, Rng& rng, Tally& tally) {
    const double d = launch_transmittance(ctx, rng, tally, 1.0, 0.0, true) / ctx.baseline;
    tally.detected_sum += d;
    tally.detected_sumsq += d * d;
}

RunContext make_context(const SlabSample& sample, const MeasurementGeometry& geom,
                        double sigma_a_override) {
    RunContext ctx;
    ctx.mode = geom.mode;
    ctx.backing = geom.backing;
    ctx.sigma_a = sigma_a_override;
    ctx.sigma_s = sample.material.sigma_s;
    ctx.sigma_t = ctx.sigma_a + ctx.sigma_s;
    ctx.thickness = sample.thickness;
    ctx.n = sample.refractive_index;
    ctx.r_illum = 0.05 * geom.illumination_diameter_mm;  // mm diameter -> cm radius
    ctx.r_detect = 0.05 * geom.detection_diameter_mm;
    ctx.backing_factor = geom.backing_white_factor;

    const double theta_c = geom.detection_half_angle_deg * kPi / 180.0;
    ctx.cos_cone_ext = std::cos(theta_c);
    ctx.sin2_cone_ext = 1.0 - ctx.cos_cone_ext * ctx.cos_cone_ext;
    const double sin_int = std::sin(theta_c) / ctx.n;
    ctx.cos_cone_int = std::sqrt(1.0 - sin_int * sin_int);
    ctx.mu_bar = 0.5 * (1.0 + ctx.cos_cone_int);
    ctx.p_iso_cone = 0.5 * (1.0 - ctx.cos_cone_int);
    ctx.p_lambert_cone = 1.0 - ctx.cos_cone_int * ctx.cos_cone_int;
    ctx.t_exit_normal = 1.0 - fresnel_reflectance(ctx.n, 1.0, ctx.mu_bar);

    switch (geom.mode) {
        case GeometryMode::reflectance_45_0: {
            const double ratio = ctx.r_detect / ctx.r_illum;
            ctx.baseline = std::min(1.0, ratio * ratio) * ctx.sin2_cone_ext;
            break;
        }
        case GeometryMode::transmittance_d0:
            ctx.baseline = ctx.sin2_cone_ext;
            break;
        case GeometryMode::transmittance_collimated:
            ctx.baseline = 1.0;
            break;
    }
    return ctx;
}

McEstimate run(const RunContext& ctx, std::uint64_t n_photons, std::uint64_t seed,
               int n_threads) {
    const std::uint64_t n_ranges = (n_photons + kPhotonsPerRange - 1) / kPhotonsPerRange;
    std::vector<Tally> partial(n_ranges);

    auto worker_body = [&](std::uint64_t range) {
        Rng rng(Rng::substream(seed, range));
        Tally& t = partial[range];
        const std::uint64_t begin = range * kPhotonsPerRange;
        const std::uint64_t end = std::min(n_photons, begin + kPhotonsPerRange);
        for (std::uint64_t i = begin; i < end; ++i) {
            switch (ctx.mode) {
                case GeometryMode::reflectance_45_0:
                    run_photon_reflectance(ctx, rng, t);
                    break;
                case GeometryMode::transmittance_d0:
                    run_photon_transmittance_d0(ctx, rng, t);
                    break;
                case GeometryMode::transmittance_collimated:
                    run_photon_transmittance_collimated(ctx, rng, t);
                    break;
            }
        }
    };

    if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads <= 1 || n_ranges == 1) {
        for (std::uint64_t r = 0; r < n_ranges; ++r) worker_body(r);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        const int count = std::min<std::uint64_t>(n_threads, n_ranges);
        pool.reserve(count);
        for (int i = 0; i < count; ++i) {
            pool.emplace_back([&] {
                for (std::uint64_t r; (r = next.fetch_add(1)) < n_ranges;) worker_body(r);
            });
        }
        for (auto& th : pool) th.join();
    }

    // Deterministic reduction in range order, independent of thread count.
    Tally total;
    for (const auto& t : partial) total.merge(t);

    McEstimate est;
    est.n_photons = n_photons;
    est.seed = seed;
    est.launched_weight = total.launched;
    est.reflected_weight = total.reflected;
    est.transmitted_weight = total.transmitted;
    est.absorbed_weight = total.absorbed;

    // Per-photon values are already normalized by the reference baseline so the
    // empty-path transmittance estimate is exactly 1.
    const double n = static_cast<double>(n_photons);
    const double mean = total.detected_sum / n;
    est.value = mean;
    if (n_photons > 1) {
        double var = (total.detected_sumsq - n * mean * mean) / (n - 1.0);
        if (var < 0.0) var = 0.0;
        est.std_error = std::sqrt(var / n);
    }
    return est;
}

double lightness_derivative(double y) {
    // d/dy of factor_to_lightness at factor y.
    constexpr double eps = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    if (y > eps) return 116.0 / (3.0 * std::cbrt(y * y));
    return kappa;
}

}  // namespace

MeasurementGeometry MeasurementGeometry::reflectance_a0(Backing b) {
    MeasurementGeometry g;
    g.mode = GeometryMode::reflectance_45_0;
    g.illumination_diameter_mm = 2.0;
    g.detection_diameter_mm = 2.0;
    g.backing = b;
    return g;
}

MeasurementGeometry MeasurementGeometry::reflectance_a1(Backing b) {
    MeasurementGeometry g = reflectance_a0(b);
    g.illumination_diameter_mm = 8.0;
    return g;
}

MeasurementGeometry MeasurementGeometry::transmittance() {
    MeasurementGeometry g;
    g.mode = GeometryMode::transmittance_d0;
    g.backing = Backing::none;
    return g;
}

void MeasurementGeometry::validate() const {
    if (mode == GeometryMode::reflectance_45_0) {
        if (illumination_diameter_mm <= 0.0 || detection_diameter_mm <= 0.0)
            throw std::invalid_argument("MeasurementGeometry: apertures must be positive");
    } else if (backing != Backing::none) {
        throw std::invalid_argument("MeasurementGeometry: transmittance cannot use a backing");
    }
    if (detection_half_angle_deg <= 0.0 || detection_half_angle_deg >= 90.0)
        throw std::invalid_argument("MeasurementGeometry: detection half angle out of range");
    if (backing_white_factor < 0.0 || backing_white_factor > 1.0)
        throw std::invalid_argument("MeasurementGeometry: backing factor out of [0,1]");
}

double fresnel_reflectance(double n_in, double n_out, double cos_theta) {
    if (n_in < 1.0 || n_out < 1.0) throw std::domain_error("fresnel: refractive index < 1");
    if (cos_theta < 0.0 || cos_theta > 1.0)
        throw std::domain_error("fresnel: cos_theta out of [0,1]");
    if (n_in == n_out) return 0.0;
    const double sin_i2 = 1.0 - cos_theta * cos_theta;
    const double sin_t2 = (n_in / n_out) * (n_in / n_out) * sin_i2;
    if (sin_t2 >= 1.0) return 1.0;  // total internal reflection
    const double cos_t = std::sqrt(1.0 - sin_t2);
    const double rs = (n_in * cos_theta - n_out * cos_t) / (n_in * cos_theta + n_out * cos_t);
    const double rp = (n_in * cos_t - n_out * cos_theta) / (n_in * cos_t + n_out * cos_theta);
    return 0.5 * (rs * rs + rp * rp);
}

McEstimate simulate(const SlabSample& sample, const MeasurementGeometry& geom,
                    std::uint64_t n_photons, std::uint64_t seed, int n_threads) {
    geom.validate();
    if (n_photons < 1) throw std::invalid_argument("simulate: n_photons must be >= 1");
    if (sample.thickness <= 0.0) throw std::invalid_argument("simulate: thickness must be > 0");
    if (sample.refractive_index < 1.0)
        throw std::invalid_argument("simulate: refractive index must be >= 1");
    if (sample.material.sigma_a < 0.0 || sample.material.sigma_s < 0.0)
        throw std::invalid_argument("simulate: negative coefficient");

    const RunContext ctx = make_context(sample, geom, sample.material.sigma_a);
    return run(ctx, n_photons, seed, n_threads);
}

TripleEstimate simulate_triple(const SlabSample& sample, const TripleConfig& config) {
    auto geom_with = [&](MeasurementGeometry g) {
        g.detection_half_angle_deg = config.detection_half_angle_deg;
        g.backing_white_factor = config.backing_white_factor;
        return g;
    };
    const MeasurementGeometry g_white = geom_with(MeasurementGeometry::reflectance_a0(Backing::white));
    const MeasurementGeometry g_a0 = geom_with(MeasurementGeometry::reflectance_a0(Backing::black));
    const MeasurementGeometry g_a1 = geom_with(MeasurementGeometry::reflectance_a1(Backing::black));
    const MeasurementGeometry g_t = geom_with(MeasurementGeometry::transmittance());

    TripleEstimate out;

    if (!sample.spectral_absorption) {
        SlabSample s = sample;
        out.refl_white = simulate(s, g_white, config.n_photons, Rng::substream(config.seed, 0),
                                  config.n_threads);
        out.refl_a0_black = simulate(s, g_a0, config.n_photons, Rng::substream(config.seed, 1),
                                     config.n_threads);
        out.refl_a1_black = simulate(s, g_a1, config.n_photons, Rng::substream(config.seed, 2),
                                     config.n_threads);
        out.transmittance = simulate(s, g_t, config.n_photons, Rng::substream(config.seed, 3),
                                     config.n_threads);

        out.triple.L_R = factor_to_lightness(out.refl_white.value);
        out.triple.L_T = factor_to_lightness(out.transmittance.value);
        const double l0 = factor_to_lightness(out.refl_a0_black.value);
        const double l1 = factor_to_lightness(out.refl_a1_black.value);
        out.triple.dL01 = std::abs(l0 - l1);

        out.se_L_R = lightness_derivative(out.refl_white.value) * out.refl_white.std_error;
        out.se_L_T = lightness_derivative(out.transmittance.value) * out.transmittance.std_error;
        const double s0 = lightness_derivative(out.refl_a0_black.value) * out.refl_a0_black.std_error;
        const double s1 = lightness_derivative(out.refl_a1_black.value) * out.refl_a1_black.std_error;
        out.se_dL01 = std::sqrt(s0 * s0 + s1 * s1);
        return out;
    }

    // Colored sample: one scalar run per 10 nm band with sigma_a(lambda);
    // sigma_s stays wavelength-independent.
    Spectrum rw, r0, r1, tr;
    Spectrum se_rw, se_r0, se_r1, se_tr;
    for (int band = 0; band < kSpectrumSamples; ++band) {
        SlabSample s = sample;
        s.material.sigma_a = (*sample.spectral_absorption)[band];
        s.spectral_absorption.reset();
        const std::uint64_t base = static_cast<std::uint64_t>(band) * 4;
        const auto e0 = simulate(s, g_white, config.n_photons,
                                 Rng::substream(config.seed, base + 0), config.n_threads);
        const auto e1 = simulate(s, g_a0, config.n_photons,
                                 Rng::substream(config.seed, base + 1), config.n_threads);
        const auto e2 = simulate(s, g_a1, config.n_photons,
                                 Rng::substream(config.seed, base + 2), config.n_threads);
        const auto e3 = simulate(s, g_t, config.n_photons,
                                 Rng::substream(config.seed, base + 3), config.n_threads);
        rw[band] = e0.value;
        r0[band] = e1.value;
        r1[band] = e2.value;
        tr[band] = e3.value;
        se_rw[band] = e0.std_error;
        se_r0[band] = e1.std_error;
        se_r1[band] = e2.std_error;
        se_tr[band] = e3.std_error;
        if (band == 0) {
            out.refl_white = e0;
            out.refl_a0_black = e1;
            out.refl_a1_black = e2;
            out.transmittance = e3;
        }
    }

    const ColorXYZ white = illuminant_white(cie_d50());
    auto spectral_lightness = [&](const Spectrum& s, const Spectrum& se, double* se_out) {
        const ColorXYZ xyz = spectrum_to_xyz(s, cie_d50());
        // Linearized standard error of L* through the Y channel.
        double wsum = 0.0, var = 0.0;
        const auto& ybar = cie_1931_observer()[1];
        for (int i = 0; i < kSpectrumSamples; ++i) {
            const double w = cie_d50()[i] * ybar[i];
            wsum += w;
            var += w * w * se[i] * se[i];
        }
        const double se_y = 100.0 * std::sqrt(var) / wsum;
        *se_out = lightness_derivative(xyz.Y / 100.0) * se_y / 100.0;
        return xyz_to_lab(xyz, white).L;
    };

    out.triple.L_R = spectral_lightness(rw, se_rw, &out.se_L_R);
    out.triple.L_T = spectral_lightness(tr, se_tr, &out.se_L_T);
    double se0 = 0.0, se1 = 0.0;
    const double l0 = spectral_lightness(r0, se_r0, &se0);
    const double l1 = spectral_lightness(r1, se_r1, &se1);
    out.triple.dL01 = std::abs(l0 - l1);
    out.se_dL01 = std::sqrt(se0 * se0 + se1 * se1);
    return out;
}

}  // namespace tscale
