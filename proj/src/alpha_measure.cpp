#include "tscale/alpha_measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace tscale {

namespace {

// Same arithmetic as MaterialTable::interpolate, without the per-call
// completeness and range checks (both are verified once by the callers).
// Keeping the expressions identical makes every scan mode bit-equal.
MeasurementTriple interp_unchecked(const MaterialTable& t, double sigma_a, double sigma_s) {
    const auto& ga = t.axis_a();
    const auto& gs = t.axis_s();
    const std::size_t ia = ga.cell_of(sigma_a);
    const std::size_t is = gs.cell_of(sigma_s);
    const double a0 = ga.values[ia], a1 = ga.values[ia + 1];
    const double s0 = gs.values[is], s1 = gs.values[is + 1];
    const double u = (sigma_a - a0) / (a1 - a0);
    const double v = (sigma_s - s0) / (s1 - s0);
    const MeasurementTriple& t00 = t.node(ia, is);
    const MeasurementTriple& t10 = t.node(ia + 1, is);
    const MeasurementTriple& t01 = t.node(ia, is + 1);
    const MeasurementTriple& t11 = t.node(ia + 1, is + 1);
    auto lerp2 = [&](double c00, double c10, double c01, double c11) {
        return (1.0 - u) * ((1.0 - v) * c00 + v * c01) + u * ((1.0 - v) * c10 + v * c11);
    };
    return {lerp2(t00.L_R, t10.L_R, t01.L_R, t11.L_R),
            lerp2(t00.L_T, t10.L_T, t01.L_T, t11.L_T),
            lerp2(t00.dL01, t10.dL01, t01.dL01, t11.dL01)};
}

struct Candidate {
    bool valid = false;
    double objective = 0.0;
    double attenuation = 0.0;  // tie-break key, p*sigma_a + sigma_s
    double sigma_a = 0.0;
    double sigma_s = 0.0;
    double slack = 0.0;
    std::uint64_t index = 0;
};

// Total order used for the argmin; independent of evaluation order.
bool better(const Candidate& a, const Candidate& b) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    if (a.objective != b.objective) return a.objective < b.objective;
    if (a.attenuation != b.attenuation) return a.attenuation < b.attenuation;
    if (a.sigma_a != b.sigma_a) return a.sigma_a < b.sigma_a;
    return a.index < b.index;
}

struct LatticeSpec {
    double step;
    std::uint64_t n_a, n_s;
    double max_a, max_s;

    double value_a(std::uint64_t ra) const { return std::min(ra * step, max_a); }
    double value_s(std::uint64_t rs) const { return std::min(rs * step, max_s); }
};

LatticeSpec make_lattice(const MaterialTable& table, double step) {
    if (step <= 0.0) throw std::invalid_argument("measure_alpha: lattice step must be > 0");
    LatticeSpec l;
    l.step = step;
    l.max_a = table.axis_a().max();
    l.max_s = table.axis_s().max();
    l.n_a = static_cast<std::uint64_t>(std::floor(l.max_a / step + 1e-9)) + 1;
    l.n_s = static_cast<std::uint64_t>(std::floor(l.max_s / step + 1e-9)) + 1;
    return l;
}

struct ScanAccum {
    Candidate best;        // feasible argmin
    Candidate best_slack;  // smallest |L_R residual| overall
};

void score_point(const MeasuredSample& m, const MeasureOptions& opts, const MaterialTable& table,
                 double sa, double ss, std::uint64_t index, ScanAccum& acc) {
    const MeasurementTriple t = interp_unchecked(table, sa, ss);
    const double rT = m.L_T_m - t.L_T;
    const double r01 = m.dL01_m - t.dL01;
    Candidate c;
    c.valid = true;
    c.objective = rT * rT + r01 * r01;
    c.attenuation = opts.params.p * sa + ss;
    c.sigma_a = sa;
    c.sigma_s = ss;
    c.slack = std::abs(m.L_R_m - t.L_R);
    c.index = index;
    if (c.slack <= opts.d && better(c, acc.best)) acc.best = c;
    if (!acc.best_slack.valid || c.slack < acc.best_slack.slack ||
        (c.slack == acc.best_slack.slack && better(c, acc.best_slack)))
        acc.best_slack = c;
}

ScanAccum scan_exhaustive(const MeasuredSample& m, const MaterialTable& table,
                          const MeasureOptions& opts, const LatticeSpec& lat) {
    const int n_threads = std::max(1, opts.n_threads);
    std::vector<ScanAccum> row_acc(lat.n_a);
    auto scan_row = [&](std::uint64_t ra) {
        const double sa = lat.value_a(ra);
        ScanAccum acc;
        for (std::uint64_t rs = 0; rs < lat.n_s; ++rs)
            score_point(m, opts, table, sa, lat.value_s(rs), ra * lat.n_s + rs, acc);
        row_acc[ra] = acc;
    };
    if (n_threads <= 1 || lat.n_a < 2) {
        for (std::uint64_t ra = 0; ra < lat.n_a; ++ra) scan_row(ra);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (std::uint64_t ra; (ra = next.fetch_add(1)) < lat.n_a;) scan_row(ra);
            });
        for (auto& th : pool) th.join();
    }
    // Row-ordered merge keeps the result independent of the thread schedule.
    ScanAccum total;
    for (const auto& acc : row_acc) {
        if (better(acc.best, total.best)) total.best = acc.best;
        if (acc.best_slack.valid &&
            (!total.best_slack.valid || acc.best_slack.slack < total.best_slack.slack ||
             (acc.best_slack.slack == total.best_slack.slack &&
              better(acc.best_slack, total.best_slack))))
            total.best_slack = acc.best_slack;
    }
    return total;
}

struct CellBound {
    std::size_t ia, is;
    double lower_bound;     // objective cannot go below this inside the cell
    bool feasible_possible; // the L_R constraint can hold somewhere in the cell
};

double interval_dist_sq(double x, double lo, double hi) {
    const double d = x < lo ? lo - x : (x > hi ? x - hi : 0.0);
    return d * d;
}

ScanAccum scan_pruned(const MeasuredSample& m, const MaterialTable& table,
                      const MeasureOptions& opts, const LatticeSpec& lat) {
    const auto& ga = table.axis_a();
    const auto& gs = table.axis_s();
    std::vector<CellBound> cells;
    cells.reserve((ga.size() - 1) * (gs.size() - 1));
    for (std::size_t ia = 0; ia + 1 < ga.size(); ++ia)
        for (std::size_t is = 0; is + 1 < gs.size(); ++is) {
            const MeasurementTriple* c[4] = {&table.node(ia, is), &table.node(ia + 1, is),
                                             &table.node(ia, is + 1), &table.node(ia + 1, is + 1)};
            double loT = c[0]->L_T, hiT = loT, lo01 = c[0]->dL01, hi01 = lo01;
            double loR = c[0]->L_R, hiR = loR;
            for (int k = 1; k < 4; ++k) {
                loT = std::min(loT, c[k]->L_T);
                hiT = std::max(hiT, c[k]->L_T);
                lo01 = std::min(lo01, c[k]->dL01);
                hi01 = std::max(hi01, c[k]->dL01);
                loR = std::min(loR, c[k]->L_R);
                hiR = std::max(hiR, c[k]->L_R);
            }
            CellBound b;
            b.ia = ia;
            b.is = is;
            b.lower_bound = interval_dist_sq(m.L_T_m, loT, hiT) +
                            interval_dist_sq(m.dL01_m, lo01, hi01);
            b.feasible_possible = m.L_R_m >= loR - opts.d && m.L_R_m <= hiR + opts.d;
            cells.push_back(b);
        }
    std::sort(cells.begin(), cells.end(), [](const CellBound& a, const CellBound& b) {
        return a.lower_bound < b.lower_bound;
    });

    auto lattice_range = [&](double lo, double hi, std::uint64_t n, std::uint64_t& k0,
                             std::uint64_t& k1) {
        k0 = static_cast<std::uint64_t>(std::max(0.0, std::floor(lo / lat.step)));
        k1 = std::min<std::uint64_t>(
            n - 1, static_cast<std::uint64_t>(std::ceil(hi / lat.step + 1e-9)));
    };

    ScanAccum acc;
    for (const CellBound& b : cells) {
        if (!b.feasible_possible) continue;
        // Non-strict so equal-objective points still compete on the tie-break.
        if (acc.best.valid && b.lower_bound > acc.best.objective) break;
        std::uint64_t a0, a1, s0, s1;
        lattice_range(ga.values[b.ia], ga.values[b.ia + 1], lat.n_a, a0, a1);
        lattice_range(gs.values[b.is], gs.values[b.is + 1], lat.n_s, s0, s1);
        for (std::uint64_t ra = a0; ra <= a1; ++ra) {
            const double sa = lat.value_a(ra);
            if (ga.cell_of(sa) != b.ia) continue;
            for (std::uint64_t rs = s0; rs <= s1; ++rs) {
                const double ss = lat.value_s(rs);
                if (gs.cell_of(ss) != b.is) continue;
                score_point(m, opts, table, sa, ss, ra * lat.n_s + rs, acc);
            }
        }
    }
    // The slack report in the infeasible case must cover the whole lattice.
    if (!acc.best.valid) return scan_exhaustive(m, table, opts, lat);
    return acc;
}

}  // namespace

MeasureResult measure_alpha(const MeasuredSample& m, const MaterialTable& table,
                            const MeasureOptions& opts) {
    m.validate();
    opts.params.validate();
    if (opts.d < 0.0) throw std::invalid_argument("measure_alpha: d must be >= 0");
    if (!table.complete()) throw std::logic_error("measure_alpha: incomplete table");

    const LatticeSpec lat = make_lattice(table, opts.lattice_step);
    const ScanAccum acc = opts.mode == ScanMode::exhaustive
                              ? scan_exhaustive(m, table, opts, lat)
                              : scan_pruned(m, table, opts, lat);

    auto to_result = [&](const Candidate& c) {
        MeasureResult r;
        r.sigma_a_m = c.sigma_a;
        r.sigma_s_m = c.sigma_s;
        r.alpha = alpha_from_coefficients({c.sigma_a, c.sigma_s}, opts.params);
        r.objective = c.objective;
        r.constraint_slack = c.slack;
        return r;
    };
    if (!acc.best.valid) {
        std::ostringstream msg;
        msg << "measure_alpha: no lattice point within " << opts.d
            << " lightness units of the reflectance reading (closest misses by "
            << acc.best_slack.slack << ")";
        throw infeasible_error(msg.str(), to_result(acc.best_slack));
    }
    return to_result(acc.best);
}

namespace {

// |L(sigma_a) - target| along the iso-attenuation segment, minimized by golden
// section; the segment lightness is monotone in practice but the search only
// assumes a locally unimodal bracket around the best coarse sample.
double golden_min(const std::function<double(double)>& f, double lo, double hi, double& x_best) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80 && b - a > 1e-12 * (1.0 + std::abs(a)); ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
    }
    x_best = f1 <= f2 ? x1 : x2;
    return std::min(f1, f2);
}

}  // namespace

InverseLut build_inverse_lut(const MaterialTable& table, const AlphaParams& params, int a_levels,
                             double l_step) {
    params.validate();
    if (a_levels < 2) throw std::invalid_argument("build_inverse_lut: need >= 2 opacity levels");
    if (l_step <= 0.0 || l_step > 100.0)
        throw std::invalid_argument("build_inverse_lut: lightness step out of range");
    if (!table.complete()) throw std::logic_error("build_inverse_lut: incomplete table");

    InverseLut lut(a_levels, l_step, params);
    const double a_max = table.axis_a().max();
    const double s_max = table.axis_s().max();
    const int n_l = lut.lightness_levels();
    constexpr int kCurveSamples = 2048;

    for (int i = 0; i < a_levels; ++i) {
        const double alpha = lut.alpha_of_level(i);
        const double st =
            alpha <= 0.0
                ? 0.0
                : attenuation_from_alpha({std::min(alpha, 1.0 - 1e-13)}, params);

        // Feasible sigma_a span of the iso-opacity set inside the grid.
        double sa_lo, sa_hi;
        if (params.p > 0.0) {
            sa_lo = std::max(0.0, (st - s_max) / params.p);
            sa_hi = std::min(a_max, st / params.p);
        } else {
            if (st > s_max) continue;  // level unreachable, row stays unpopulated
            sa_lo = 0.0;
            sa_hi = a_max;
        }
        if (sa_lo > sa_hi) continue;

        auto point_of = [&](double sa) {
            const double ss =
                params.p > 0.0 ? std::clamp(st - params.p * sa, 0.0, s_max) : st;
            return std::pair<double, double>{sa, ss};
        };
        auto lightness_of = [&](double sa) {
            const auto [pa, ps] = point_of(sa);
            return interp_unchecked(table, pa, ps).L_R;
        };

        if (sa_hi - sa_lo < 1e-12) {
            const auto [pa, ps] = point_of(sa_lo);
            const double L = interp_unchecked(table, pa, ps).L_R;
            const int l = std::clamp(static_cast<int>(std::lround(L / l_step)), 0, n_l - 1);
            auto& e = lut.entry(i, l);
            e = {pa, ps, L, std::abs(L - l * l_step) <= 0.5 * l_step};
            continue;
        }

        std::array<double, kCurveSamples> sa_s, L_s;
        for (int j = 0; j < kCurveSamples; ++j) {
            sa_s[j] = sa_lo + (sa_hi - sa_lo) * j / (kCurveSamples - 1);
            L_s[j] = lightness_of(sa_s[j]);
        }

        for (int l = 0; l < n_l; ++l) {
            const double target = l * l_step;
            int j_best = 0;
            double d_best = std::abs(L_s[0] - target);
            for (int j = 1; j < kCurveSamples; ++j) {
                const double d = std::abs(L_s[j] - target);
                if (d < d_best) {
                    d_best = d;
                    j_best = j;
                }
            }
            const double lo = sa_s[std::max(0, j_best - 1)];
            const double hi = sa_s[std::min(kCurveSamples - 1, j_best + 1)];
            double sa_min = sa_s[j_best];
            double d_min = golden_min(
                [&](double sa) { return std::abs(lightness_of(sa) - target); }, lo, hi, sa_min);
            if (d_best < d_min) {
                d_min = d_best;
                sa_min = sa_s[j_best];
            }
            if (d_min > 0.5 * l_step) continue;
            const auto [pa, ps] = point_of(sa_min);
            lut.entry(i, l) = {pa, ps, interp_unchecked(table, pa, ps).L_R, true};
        }
    }
    return lut;
}

ReferenceMaterial retrieve_reference_material(const ColorRGB& rgb, const AlphaValue& a,
                                              const InverseLut& lut, RetrieveInfo* info) {
    if (a.a < 0.0 || a.a > 1.0)
        throw std::domain_error("retrieve_reference_material: A must be in [0,1]");
    const int a_level = static_cast<int>(std::lround(a.a * (lut.a_levels() - 1)));
    const double L = srgb_lightness_d50(rgb);
    const int n_l = lut.lightness_levels();
    const int l0 = std::clamp(static_cast<int>(std::lround(L / lut.l_step())), 0, n_l - 1);

    const InverseLutEntry* found = nullptr;
    bool exact = false;
    for (int off = 0; off < n_l && !found; ++off) {
        const InverseLutEntry* lo = l0 - off >= 0 ? &lut.entry(a_level, l0 - off) : nullptr;
        const InverseLutEntry* hi =
            off > 0 && l0 + off < n_l ? &lut.entry(a_level, l0 + off) : nullptr;
        if (lo && !lo->populated) lo = nullptr;
        if (hi && !hi->populated) hi = nullptr;
        if (lo && hi)
            found = std::abs(lo->lightness - L) <= std::abs(hi->lightness - L) ? lo : hi;
        else if (lo || hi)
            found = lo ? lo : hi;
        exact = found && off == 0;
    }
    if (!found)
        throw std::runtime_error(
            "retrieve_reference_material: no populated entry for this opacity level");
    if (info) {
        info->lightness_distance = std::abs(found->lightness - L);
        info->exact_level = exact;
    }
    return {found->sigma_a, found->sigma_s};
}

namespace {

Spectrum require_block(const std::map<std::string, std::map<int, double>>& blocks,
                       const std::string& label, const std::string& source) {
    const auto it = blocks.find(label);
    if (it == blocks.end())
        throw std::runtime_error(source + ": missing spectrum block '" + label + "'");
    Spectrum s;
    for (int i = 0; i < kSpectrumSamples; ++i) {
        const int wl = static_cast<int>(kLambdaMinNm) + i * static_cast<int>(kLambdaStepNm);
        const auto v = it->second.find(wl);
        if (v == it->second.end())
            throw std::runtime_error(source + ": block '" + label + "' is missing " +
                                     std::to_string(wl) + " nm");
        s[i] = v->second;
    }
    if (it->second.size() != kSpectrumSamples)
        throw std::runtime_error(source + ": block '" + label + "' has off-lattice wavelengths");
    return s;
}

double spectrum_lightness(const Spectrum& s) {
    return xyz_to_lab(spectrum_to_xyz(s, cie_d50()), d50_white()).L;
}

}  // namespace

MeasuredSample read_measurement_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(source_name + ": empty measurement file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "block,wavelength_nm,value")
        throw std::runtime_error(source_name + ": expected header block,wavelength_nm,value");

    std::map<std::string, std::map<int, double>> blocks;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string label, wl_s, val_s;
        if (!std::getline(ls, label, ',') || !std::getline(ls, wl_s, ',') ||
            !std::getline(ls, val_s))
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": expected block,wavelength_nm,value");
        int wl;
        double val;
        try {
            std::size_t p1, p2;
            wl = std::stoi(wl_s, &p1);
            val = std::stod(val_s, &p2);
            if (p1 != wl_s.size() || p2 != val_s.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": malformed number");
        }
        if (val < 0.0)
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": negative measurement factor");
        if (!blocks[label].emplace(wl, val).second)
            throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                     ": duplicate wavelength in block '" + label + "'");
    }

    const Spectrum r_white = require_block(blocks, "reflectance_white", source_name);
    const Spectrum r_a0 = require_block(blocks, "reflectance_a0_black", source_name);
    const Spectrum r_a1 = require_block(blocks, "reflectance_a1_black", source_name);
    const Spectrum t = require_block(blocks, "transmittance", source_name);
    if (blocks.size() != 4)
        throw std::runtime_error(source_name + ": unexpected extra spectrum block");

    MeasuredSample m;
    m.L_R_m = spectrum_lightness(r_white);
    m.L_T_m = spectrum_lightness(t);
    m.dL01_m = std::abs(spectrum_lightness(r_a0) - spectrum_lightness(r_a1));
    m.validate();
    return m;
}

MeasuredSample read_measurement_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_measurement_csv(in, path);
}

}  // namespace tscale
