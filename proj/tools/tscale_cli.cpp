#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tscale/alpha_measure.hpp"
#include "tscale/alpha_model.hpp"
#include "tscale/cli_config.hpp"
#include "tscale/colorimetry.hpp"
#include "tscale/image_tools.hpp"
#include "tscale/material_table.hpp"
#include "tscale/psf_analysis.hpp"
#include "tscale/psychometrics.hpp"
#include "tscale/slab_mc.hpp"

namespace {

// Fixed shortest-roundtrip formatting so repeated runs are byte-identical.
std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            std::size_t pos;
            out.push_back(std::stod(field, &pos));
            if (pos != field.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error(flag + ": malformed number '" + field + "'");
        }
    }
    if (out.empty()) throw std::runtime_error(flag + ": empty list");
    return out;
}

tscale::MaterialTable load_table_arg(const std::string& path) {
    if (path.empty())
        throw std::runtime_error(
            "no material table given; pass --table or set TSCALE_TABLE");
    return tscale::load_table(path);
}

int classify_error(const std::exception& e) {
    if (dynamic_cast<const tscale::infeasible_error*>(&e)) return 3;
    const std::string msg = e.what();
    if (msg.find("cannot open") != std::string::npos ||
        msg.find("write failed") != std::string::npos ||
        msg.find("truncated") != std::string::npos ||
        msg.find("checksum") != std::string::npos)
        return 5;
    if (dynamic_cast<const std::logic_error*>(&e)) return 4;  // domain/validation
    return 2;  // malformed input files
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Device-independent translucency scalar toolkit"};
    app.require_subcommand(1);
    app.get_formatter()->column_width(34);

    std::string config_path;
    app.add_option("--config", config_path, "key=value defaults file");

    // Shared measurement/model knobs, overridable per subcommand.
    struct Shared {
        std::string table;
        double p = 0.4, q = 0.6, c = 0.0153;
        int threads = 1;
    } sh;

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--p", sh.p, "absorption weight in the modified attenuation");
        cmd->add_option("--q", sh.q, "power-law exponent");
        cmd->add_option("--c", sh.c, "attenuation scale constant, cm");
    };
    auto add_table_flag = [&](CLI::App* cmd) {
        cmd->add_option("--table", sh.table, "material table (.mtab)")
            ->envname("TSCALE_TABLE");
    };

    // build-tables
    auto* cb = app.add_subcommand("build-tables", "simulate a reference material table");
    std::string out_path, csv_path, checkpoint, resume, notes;
    double max_sigma = 0.0;
    tscale::TableMetadata meta;
    cb->add_option("--out", out_path, "output .mtab path")->required();
    cb->add_option("--csv", csv_path, "also export the table as CSV");
    cb->add_option("--max-sigma", max_sigma, "truncate both axes at this value (0 = full grid)");
    cb->add_option("--photons", meta.n_photons, "photons per measurement");
    cb->add_option("--seed", meta.seed, "base random seed");
    cb->add_option("--thickness", meta.thickness_cm, "slab thickness, cm");
    cb->add_option("--n", meta.refractive_index, "refractive index");
    cb->add_option("--half-angle", meta.detection_half_angle_deg, "detection half angle, deg");
    cb->add_option("--backing-white-factor", meta.backing_white_factor,
                   "white backing reflectance");
    cb->add_option("--checkpoint", checkpoint, "checkpoint path written after each row");
    cb->add_option("--resume", resume, "resume from a partial .mtab");
    cb->add_option("--threads", sh.threads, "worker threads");

    // eval
    auto* ce = app.add_subcommand("eval", "opacity of a reference material");
    double sa = 0.0, ss = 0.0;
    ce->add_option("--sa", sa, "absorption coefficient, cm^-1")->required();
    ce->add_option("--ss", ss, "scattering coefficient, cm^-1")->required();
    add_model_flags(ce);

    // rescale
    auto* cr = app.add_subcommand("rescale", "opacity under a print-size scale factor");
    double alpha_in = 0.0, k_factor = 1.0;
    cr->add_option("--alpha", alpha_in, "opacity of the original")->required();
    cr->add_option("--k", k_factor, "size scale factor (new/original)")->required();
    cr->add_option("--q", sh.q, "power-law exponent");

    // measure
    auto* cm = app.add_subcommand("measure", "invert a measurement triple to coefficients");
    std::string measure_input, scan_mode = "exhaustive";
    double lr = -1.0, lt = -1.0, dl01 = -1.0, d_tol = 2.0, step = 0.1;
    cm->add_option("--input", measure_input, "measurement CSV with four spectra blocks");
    cm->add_option("--lr", lr, "reflectance lightness (white backing)");
    cm->add_option("--lt", lt, "transmittance lightness");
    cm->add_option("--dl01", dl01, "edge-loss lightness difference");
    cm->add_option("--d", d_tol, "reflectance lightness tolerance");
    cm->add_option("--step", step, "scan lattice step, cm^-1");
    cm->add_option("--mode", scan_mode, "scan mode: exhaustive | pruned")
        ->check(CLI::IsMember({"exhaustive", "pruned"}));
    cm->add_option("--threads", sh.threads, "worker threads");
    add_table_flag(cm);
    add_model_flags(cm);

    // retrieve
    auto* cv = app.add_subcommand("retrieve", "reference material for an RGBA value");
    double rv = 0.0, gv = 0.0, bv = 0.0, alpha_q = 0.0, l_step = 0.1;
    int a_levels = 256;
    cv->add_option("--alpha", alpha_q, "opacity in [0,1]")->required();
    cv->add_option("--r", rv, "sRGB red in [0,1]")->required();
    cv->add_option("--g", gv, "sRGB green in [0,1]")->required();
    cv->add_option("--b", bv, "sRGB blue in [0,1]")->required();
    cv->add_option("--a-levels", a_levels, "opacity quantization levels");
    cv->add_option("--l-step", l_step, "lightness quantization step");
    add_table_flag(cv);
    add_model_flags(cv);

    // fit-psycho
    auto* cf = app.add_subcommand("fit-psycho", "fit the perceptual model or probit curves");
    std::string pairs_path, trials_path;
    bool do_loo = false;
    cf->add_option("--pairs", pairs_path, "visual pair set CSV (sa1,ss1,sa2,ss2,is_anchor)");
    cf->add_option("--trials", trials_path, "trial CSV (observer,direction,level,response)");
    cf->add_flag("--loo", do_loo, "also run leave-one-out cross-validation");
    add_model_flags(cf);

    // stress
    auto* cs = app.add_subcommand("stress", "disagreement index between difference lists");
    std::string dt_list, dv_list;
    double compare_stress = 0.0;
    int f_n = 0;
    cs->add_option("--dt", dt_list, "computed differences, comma separated")->required();
    cs->add_option("--dv", dv_list, "visual differences, comma separated")->required();
    cs->add_option("--compare", compare_stress, "second stress value for the F test");
    cs->add_option("--n", f_n, "sample count behind each stress value");

    // psf-matrix
    auto* cp = app.add_subcommand("psf-matrix", "device discrimination over a PSF family");
    double cpd_min = 1.0, cpd_max = 50.0, distance_cm = 80.0, threshold = 0.5;
    double hvs_a = -1.0, hvs_b = -1.0, stim_diameter = 8.0;
    int psf_count = 50;
    std::string csf_path, matrix_out;
    cp->add_option("--cpd-min", cpd_min, "lowest cutoff frequency, cycles/degree");
    cp->add_option("--cpd-max", cpd_max, "highest cutoff frequency, cycles/degree");
    cp->add_option("--count", psf_count, "number of PSFs");
    cp->add_option("--distance", distance_cm, "viewing distance, cm");
    cp->add_option("--threshold", threshold, "edge-loss discrimination threshold");
    cp->add_option("--out", matrix_out, "write the matrix CSV here instead of stdout");
    cp->add_option("--hvs-a", hvs_a, "compare two PSFs visually: first cutoff, cpd");
    cp->add_option("--hvs-b", hvs_b, "second cutoff, cpd");
    cp->add_option("--csf", csf_path, "contrast sensitivity CSV (cycles_per_degree,response)");
    cp->add_option("--stimulus", stim_diameter, "stimulus disk diameter, mm");

    // color-transfer
    auto* cc = app.add_subcommand("color-transfer", "transfer rendering color in CIELAB");
    std::string orig_path, ref_path, mask_path, transfer_out, png_out;
    cc->add_option("--original", orig_path, "original rendering (Lab PFM)")->required();
    cc->add_option("--reference", ref_path, "reference rendering (Lab PFM)")->required();
    cc->add_option("--mask", mask_path, "specular mask (grayscale PFM)");
    cc->add_option("--out", transfer_out, "output Lab PFM")->required();
    cc->add_option("--png", png_out, "also write an sRGB PNG preview");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        tscale::CliConfig cfg;
        if (!config_path.empty()) cfg = tscale::parse_config_file(config_path);
        if (sh.table.empty()) sh.table = cfg.table_path;
        // Config supplies defaults; explicit flags win.
        if (!ce->count("--p") && !cm->count("--p") && !cv->count("--p") && !cf->count("--p")) {
            if (!config_path.empty()) {
                sh.p = cfg.params.p;
                sh.q = cfg.params.q;
                sh.c = cfg.params.c;
            }
        }
        const tscale::AlphaParams params{sh.p, sh.q, sh.c};

        if (*cb) {
            if (!config_path.empty()) {
                if (!cb->count("--photons")) meta.n_photons = cfg.sim.n_photons;
                if (!cb->count("--seed")) meta.seed = cfg.sim.seed;
                if (!cb->count("--thickness")) meta.thickness_cm = cfg.thickness_cm;
                if (!cb->count("--n")) meta.refractive_index = cfg.refractive_index;
                if (!cb->count("--half-angle"))
                    meta.detection_half_angle_deg = cfg.sim.detection_half_angle_deg;
                if (!cb->count("--backing-white-factor"))
                    meta.backing_white_factor = cfg.sim.backing_white_factor;
                if (!cb->count("--threads")) sh.threads = cfg.sim.n_threads;
            }
            meta.notes =
                "axes: production list read as steps 0.05 / 0.1 / 0.2 / 2 plus sparse tail; "
                "d/0 transmittance idealized as cosine-weighted hemispherical irradiation";
            const tscale::CoefficientGrid grid =
                max_sigma > 0.0 ? tscale::CoefficientGrid::paper_truncated(max_sigma)
                                : tscale::CoefficientGrid::paper_default();
            tscale::BuildOptions opts;
            opts.n_threads = sh.threads;
            opts.checkpoint_path = checkpoint;
            std::optional<tscale::MaterialTable> prev;
            if (!resume.empty()) prev = tscale::load_table(resume);
            const tscale::MaterialTable table =
                tscale::build_table(grid, grid, meta, opts, prev ? &*prev : nullptr);
            tscale::save_table(table, out_path);
            if (!csv_path.empty()) {
                std::ofstream csv(csv_path, std::ios::trunc);
                if (!csv) throw std::runtime_error("cannot open " + csv_path);
                table.export_csv(csv);
                if (!csv) throw std::runtime_error("write failed for " + csv_path);
            }
            std::cout << "nodes,ok,failed\n"
                      << table.node_count() << ',' << table.count(tscale::NodeStatus::ok) << ','
                      << table.count(tscale::NodeStatus::failed) << "\n";
        } else if (*ce) {
            const tscale::AlphaValue a = tscale::alpha_from_coefficients({sa, ss}, params);
            std::cout << "sigma_a,sigma_s,A\n"
                      << num(sa) << ',' << num(ss) << ',' << num(a.a) << "\n";
        } else if (*cr) {
            const tscale::AlphaValue a = tscale::rescale_alpha({alpha_in}, k_factor, sh.q);
            std::cout << "alpha,k,alpha_rescaled\n"
                      << num(alpha_in) << ',' << num(k_factor) << ',' << num(a.a) << "\n";
        } else if (*cm) {
            tscale::MeasuredSample sample;
            if (!measure_input.empty()) {
                sample = tscale::read_measurement_csv_file(measure_input);
            } else if (cm->count("--lr") && cm->count("--lt") && cm->count("--dl01")) {
                sample = {lr, lt, dl01};
            } else {
                throw std::runtime_error(
                    "measure: pass --input or all of --lr/--lt/--dl01");
            }
            const tscale::MaterialTable table = load_table_arg(sh.table);
            tscale::MeasureOptions opts;
            opts.d = d_tol;
            opts.lattice_step = step;
            opts.params = params;
            opts.n_threads = sh.threads;
            opts.mode = scan_mode == "pruned" ? tscale::ScanMode::pruned
                                              : tscale::ScanMode::exhaustive;
            const tscale::MeasureResult res = tscale::measure_alpha(sample, table, opts);
            std::cout << "sigma_a,sigma_s,A,objective,slack\n"
                      << num(res.sigma_a_m) << ',' << num(res.sigma_s_m) << ','
                      << num(res.alpha.a) << ',' << num(res.objective) << ','
                      << num(res.constraint_slack) << "\n";
        } else if (*cv) {
            const tscale::MaterialTable table = load_table_arg(sh.table);
            const tscale::InverseLut lut =
                tscale::build_inverse_lut(table, params, a_levels, l_step);
            tscale::RetrieveInfo info;
            const tscale::ReferenceMaterial mat =
                tscale::retrieve_reference_material({rv, gv, bv}, {alpha_q}, lut, &info);
            std::cout << "sigma_a,sigma_s,A,lightness_distance\n"
                      << num(mat.sigma_a) << ',' << num(mat.sigma_s) << ','
                      << num(tscale::alpha_from_coefficients(mat, params).a) << ','
                      << num(info.lightness_distance) << "\n";
        } else if (*cf) {
            if (pairs_path.empty() == trials_path.empty())
                throw std::runtime_error("fit-psycho: pass exactly one of --pairs or --trials");
            if (!pairs_path.empty()) {
                const tscale::VisualPairSet v = tscale::read_pairs_csv_file(pairs_path);
                const tscale::PsychoFit fit = tscale::fit_psychometric_params(v, params);
                std::cout << "p,q,objective,stress,degenerate\n"
                          << num(fit.p) << ',' << num(fit.q) << ',' << num(fit.objective) << ','
                          << num(fit.stress) << ',' << (fit.degenerate ? 1 : 0) << "\n";
                if (do_loo) {
                    const tscale::LooStats loo = tscale::loo_cross_validation(v, params);
                    std::cout << "folds,mean,std,max,p_min,p_mean,p_max,q_min,q_mean,q_max\n"
                              << loo.folds << ',' << num(loo.mean_disagreement) << ','
                              << num(loo.std_disagreement) << ',' << num(loo.max_disagreement)
                              << ',' << num(loo.p_min) << ',' << num(loo.p_mean) << ','
                              << num(loo.p_max) << ',' << num(loo.q_min) << ','
                              << num(loo.q_mean) << ',' << num(loo.q_max) << "\n";
                }
            } else {
                const auto series = tscale::read_trials_csv_file(trials_path);
                std::cout << "direction,mu,sigma,t50,chi2,dof,passed\n";
                for (const auto& s : series) {
                    const tscale::ProbitResult r = tscale::probit_fit(tscale::monotone_filter(s));
                    std::cout << (s.direction == tscale::TrialSeries::Direction::increasing
                                      ? "increasing"
                                      : "decreasing")
                              << ',' << num(r.mu) << ',' << num(r.sigma) << ',' << num(r.t50)
                              << ',' << num(r.chi2) << ',' << r.dof << ','
                              << (r.passed ? 1 : 0) << "\n";
                }
            }
        } else if (*cs) {
            const std::vector<double> dt = parse_list(dt_list, "--dt");
            const std::vector<double> dv = parse_list(dv_list, "--dv");
            const double s = tscale::stress(dt, dv);
            if (cs->count("--compare")) {
                if (f_n < 2) throw std::runtime_error("stress: --compare needs --n >= 2");
                const tscale::FVerdict v = tscale::f_test_stress(s, compare_stress, f_n);
                const char* name = v == tscale::FVerdict::better
                                       ? "better"
                                       : v == tscale::FVerdict::poorer ? "poorer"
                                                                       : "insignificant";
                std::cout << "stress,compare,verdict\n"
                          << num(s) << ',' << num(compare_stress) << ',' << name << "\n";
            } else {
                std::cout << "stress\n" << num(s) << "\n";
            }
        } else if (*cp) {
            if (hvs_a >= 0.0 || hvs_b >= 0.0) {
                if (hvs_a < 0.0 || hvs_b < 0.0 || csf_path.empty())
                    throw std::runtime_error(
                        "psf-matrix: visual comparison needs --hvs-a, --hvs-b and --csf");
                const tscale::CsfTable csf = tscale::read_csf_csv_file(csf_path);
                tscale::BlurCompareConfig bc;
                bc.stimulus_diameter_mm = stim_diameter;
                bc.viewing_distance_cm = distance_cm;
                const double dl = tscale::hvs_blur_difference(
                    tscale::cpd_to_psf_param(hvs_a, distance_cm),
                    tscale::cpd_to_psf_param(hvs_b, distance_cm), csf, bc);
                std::cout << "cpd_a,cpd_b,mean_dL\n"
                          << num(hvs_a) << ',' << num(hvs_b) << ',' << num(dl) << "\n";
            } else {
                if (psf_count < 2) throw std::runtime_error("psf-matrix: --count must be >= 2");
                std::vector<tscale::GaussianPsf> psfs;
                std::vector<double> cpds;
                for (int i = 0; i < psf_count; ++i) {
                    const double f =
                        psf_count == 1
                            ? cpd_min
                            : cpd_min + (cpd_max - cpd_min) * i / (psf_count - 1);
                    cpds.push_back(f);
                    psfs.push_back(tscale::cpd_to_psf_param(f, distance_cm));
                }
                const tscale::DiscriminationMatrix m = tscale::device_discrimination(
                    psfs, tscale::ApertureConfig{2.0, 2.0}, tscale::ApertureConfig{2.0, 8.0},
                    threshold);
                std::ostream* out = &std::cout;
                std::ofstream file;
                if (!matrix_out.empty()) {
                    file.open(matrix_out, std::ios::trunc);
                    if (!file) throw std::runtime_error("cannot open " + matrix_out);
                    out = &file;
                }
                *out << "cpd_i,cpd_j,edge_loss_i,edge_loss_j,discriminable\n";
                for (std::size_t i = 0; i < m.n; ++i)
                    for (std::size_t j = i + 1; j < m.n; ++j)
                        *out << num(cpds[i]) << ',' << num(cpds[j]) << ','
                             << num(m.edge_loss[i]) << ',' << num(m.edge_loss[j]) << ','
                             << (m.at(i, j) ? 1 : 0) << "\n";
                if (!matrix_out.empty() && !file)
                    throw std::runtime_error("write failed for " + matrix_out);
            }
        } else if (*cc) {
            const tscale::LabImage original = tscale::read_lab_pfm(orig_path);
            const tscale::LabImage reference = tscale::read_lab_pfm(ref_path);
            tscale::PixelMask mask;
            if (!mask_path.empty()) {
                int mw = 0, mh = 0;
                mask = tscale::read_mask_pfm(mask_path, mw, mh);
                if (mw != original.width || mh != original.height)
                    throw std::invalid_argument("color-transfer: mask dimensions differ");
            }
            const tscale::TransferResult res =
                tscale::color_transfer(original, reference, mask);
            tscale::write_lab_pfm(res.image, transfer_out);
            if (!png_out.empty()) tscale::write_png_srgb(res.image, png_out);
            std::cout << "lightness_shift,clamped_pixels\n"
                      << num(res.lightness_shift) << ',' << res.clamped_pixels << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    }
    return 0;
}
