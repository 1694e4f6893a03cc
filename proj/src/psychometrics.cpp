#include "tscale/psychometrics.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tscale {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Downhill simplex minimization with a fixed iteration budget; returns the
// best vertex and its value, plus whether the simplex collapsed below tol.
struct SimplexResult {
    std::vector<double> x;
    double f = kInf;
    bool converged = false;
};

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, int max_iter = 2000,
                          double tol = 1e-10) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> xs(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += step;
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fs[i] = f(xs[i]);

    auto order = [&] {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        std::vector<std::vector<double>> xs2(n + 1);
        std::vector<double> fs2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            xs2[i] = xs[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        xs = std::move(xs2);
        fs = std::move(fs2);
    };

    SimplexResult res;
    for (int it = 0; it < max_iter; ++it) {
        order();
        if (std::abs(fs[n] - fs[0]) <= tol * (1.0 + std::abs(fs[0]))) {
            res.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j] / n;
        auto point = [&](double coef) {
            std::vector<double> x(n);
            for (std::size_t j = 0; j < n; ++j)
                x[j] = centroid[j] + coef * (xs[n][j] - centroid[j]);
            return x;
        };
        const auto xr = point(-1.0);
        const double fr = f(xr);
        if (fr < fs[0]) {
            const auto xe = point(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                xs[n] = xe;
                fs[n] = fe;
            } else {
                xs[n] = xr;
                fs[n] = fr;
            }
        } else if (fr < fs[n - 1]) {
            xs[n] = xr;
            fs[n] = fr;
        } else {
            const auto xc = point(fr < fs[n] ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fs[n])) {
                xs[n] = xc;
                fs[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }
    order();
    res.x = xs[0];
    res.f = fs[0];
    return res;
}

}  // namespace

void TrialSeries::validate() const {
    if (levels.size() < 2) throw std::invalid_argument("TrialSeries: need >= 2 levels");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] <= levels[i - 1])
            throw std::invalid_argument("TrialSeries: levels must be strictly increasing");
    if (responses.empty()) throw std::invalid_argument("TrialSeries: need >= 1 observer");
    for (const auto& row : responses) {
        if (row.size() != levels.size())
            throw std::invalid_argument("TrialSeries: observer row length mismatch");
        for (int r : row)
            if (r != 0 && r != 1)
                throw std::invalid_argument("TrialSeries: responses must be 0 or 1");
    }
}

TrialSeries monotone_filter(const TrialSeries& series) {
    series.validate();
    TrialSeries out = series;
    const std::size_t n = series.levels.size();
    for (auto& row : out.responses) {
        // Monotone binary sequences are 0^k 1^(n-k) or 1^k 0^(n-k). Pick the
        // candidate with the fewest flips, breaking ties toward agreement with
        // the original at the latest positions.
        std::vector<std::vector<int>> candidates;
        for (std::size_t k = 0; k <= n; ++k) {
            std::vector<int> up(n), down(n);
            for (std::size_t i = 0; i < n; ++i) {
                up[i] = i < k ? 0 : 1;
                down[i] = i < k ? 1 : 0;
            }
            candidates.push_back(std::move(up));
            candidates.push_back(std::move(down));
        }
        auto hamming = [&](const std::vector<int>& c) {
            std::size_t d = 0;
            for (std::size_t i = 0; i < n; ++i) d += static_cast<std::size_t>(c[i] != row[i]);
            return d;
        };
        auto later_agreement = [&](const std::vector<int>& a, const std::vector<int>& b) {
            // true when a agrees with the original at the last differing level
            for (std::size_t i = n; i-- > 0;) {
                const bool agree_a = a[i] == row[i];
                const bool agree_b = b[i] == row[i];
                if (agree_a != agree_b) return agree_a;
            }
            return false;
        };
        const std::vector<int>* best = &candidates.front();
        std::size_t best_d = hamming(*best);
        for (const auto& c : candidates) {
            const std::size_t d = hamming(c);
            if (d < best_d || (d == best_d && later_agreement(c, *best))) {
                best = &c;
                best_d = d;
            }
        }
        row = *best;
    }
    return out;
}

ProbitResult probit_fit(const TrialSeries& series) {
    series.validate();
    const std::size_t n_levels = series.levels.size();
    const std::size_t n_obs = series.responses.size();
    std::vector<double> r(n_levels, 0.0);
    for (const auto& row : series.responses)
        for (std::size_t i = 0; i < n_levels; ++i) r[i] += row[i];
    const double total = std::accumulate(r.begin(), r.end(), 0.0);
    if (total == 0.0 || total == static_cast<double>(n_levels * n_obs))
        throw std::domain_error("probit_fit: all responses equal, parameters not identifiable");

    const double n_i = static_cast<double>(n_obs);
    auto nll = [&](const std::vector<double>& x) {
        const double mu = x[0], sigma = std::exp(x[1]);
        double s = 0.0;
        for (std::size_t i = 0; i < n_levels; ++i) {
            const double p =
                std::clamp(normal_cdf((series.levels[i] - mu) / sigma), 1e-12, 1.0 - 1e-12);
            s -= r[i] * std::log(p) + (n_i - r[i]) * std::log1p(-p);
        }
        return std::isfinite(s) ? s : kInf;
    };

    // Crude start: the level nearest 50% response, spread from the level range.
    double mu0 = series.levels[n_levels / 2];
    double best_gap = kInf;
    for (std::size_t i = 0; i < n_levels; ++i) {
        const double gap = std::abs(r[i] / n_i - 0.5);
        if (gap < best_gap) {
            best_gap = gap;
            mu0 = series.levels[i];
        }
    }
    const double range = series.levels.back() - series.levels.front();
    const SimplexResult fit = nelder_mead(nll, {mu0, std::log(range / 4.0)}, range / 8.0, 4000);
    if (!fit.converged || !std::isfinite(fit.f))
        throw std::runtime_error("probit_fit: maximum-likelihood search did not converge");

    ProbitResult res;
    res.mu = fit.x[0];
    res.sigma = std::exp(fit.x[1]);
    res.t50 = res.mu;
    res.dof = static_cast<int>(n_levels) - 2;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < n_levels; ++i) {
        const double p = normal_cdf((series.levels[i] - res.mu) / res.sigma);
        const double var = n_i * p * (1.0 - p);
        const double resid = r[i] - n_i * p;
        if (var > 1e-300)
            chi2 += resid * resid / var;
        else if (std::abs(resid) > 1e-9)
            chi2 = kInf;
    }
    res.chi2 = chi2;
    if (res.dof >= 1) {
        const boost::math::chi_squared dist(res.dof);
        res.passed = chi2 <= boost::math::quantile(dist, 0.95);
    } else {
        res.passed = chi2 <= 1e-9;
    }
    return res;
}

double stress(const std::vector<double>& dT, const std::vector<double>& dV) {
    if (dT.empty() || dT.size() != dV.size())
        throw std::invalid_argument("stress: lists must be non-empty and equal length");
    double tt = 0.0, tv = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < dT.size(); ++i) {
        tt += dT[i] * dT[i];
        tv += dT[i] * dV[i];
        vv += dV[i] * dV[i];
    }
    if (vv == 0.0 || tv == 0.0 || tt == 0.0)
        throw std::domain_error("stress: degenerate difference lists");
    const double g = tt / tv;
    double num = 0.0;
    for (std::size_t i = 0; i < dT.size(); ++i) {
        const double d = dT[i] - g * dV[i];
        num += d * d;
    }
    return 100.0 * std::sqrt(num / (g * g * vv));
}

FVerdict f_test_stress(double stress_x, double stress_y, int n) {
    if (stress_x <= 0.0 || stress_y <= 0.0)
        throw std::domain_error("f_test_stress: stresses must be > 0");
    if (n < 2) throw std::invalid_argument("f_test_stress: need n >= 2");
    const double ratio = stress_x / stress_y;
    const double f = ratio * ratio;
    const boost::math::fisher_f dist(n - 1, n - 1);
    const double f_lo = boost::math::quantile(dist, 0.025);
    const double f_hi = boost::math::quantile(dist, 0.975);
    if (f < f_lo) return FVerdict::better;
    if (f > f_hi) return FVerdict::poorer;
    return FVerdict::insignificant;
}

void VisualPairSet::validate() const {
    if (pairs.empty()) throw std::invalid_argument("VisualPairSet: empty");
    if (anchor_index >= pairs.size())
        throw std::invalid_argument("VisualPairSet: anchor index out of range");
    for (const auto& p : pairs)
        if (p.first.sigma_a < 0.0 || p.first.sigma_s < 0.0 || p.second.sigma_a < 0.0 ||
            p.second.sigma_s < 0.0)
            throw std::invalid_argument("VisualPairSet: negative coefficient");
}

namespace {

double pair_delta(const MaterialPair& pr, const AlphaParams& params) {
    return std::abs(alpha_from_coefficients(pr.first, params).a -
                    alpha_from_coefficients(pr.second, params).a);
}

double fit_objective(const VisualPairSet& v, const AlphaParams& params) {
    const double anchor = pair_delta(v.pairs[v.anchor_index], params);
    double s = 0.0;
    for (const auto& pr : v.pairs) {
        const double d = pair_delta(pr, params) - anchor;
        s += d * d;
    }
    return s;
}

}  // namespace

PsychoFit fit_psychometric_params(const VisualPairSet& v, const AlphaParams& params0) {
    v.validate();
    params0.validate();
    PsychoFit fit;
    if (v.pairs.size() < 2) {
        fit.p = params0.p;
        fit.q = params0.q;
        fit.degenerate = true;
        return fit;
    }

    auto objective = [&](double p, double q) {
        if (p < 0.0 || p > 5.0 || q <= 1e-6 || q > 3.0) return kInf;
        return fit_objective(v, {p, q, params0.c});
    };

    double best_p = params0.p, best_q = params0.q, best_f = kInf;
    for (int i = 0; i <= 50; ++i)
        for (int j = 1; j <= 51; ++j) {
            const double p = 5.0 * i / 50.0;
            const double q = 3.0 * j / 51.0;
            const double f = objective(p, q);
            if (f < best_f) {
                best_f = f;
                best_p = p;
                best_q = q;
            }
        }
    const SimplexResult refined = nelder_mead(
        [&](const std::vector<double>& x) { return objective(x[0], x[1]); },
        {best_p, best_q}, 0.05, 3000, 1e-14);
    if (refined.f <= best_f) {
        best_p = refined.x[0];
        best_q = refined.x[1];
        best_f = refined.f;
    }
    if (!std::isfinite(best_f))
        throw std::runtime_error("fit_psychometric_params: non-finite objective");

    fit.p = best_p;
    fit.q = best_q;
    fit.objective = best_f;
    const AlphaParams fitted{best_p, best_q, params0.c};
    std::vector<double> dT, dV;
    for (const auto& pr : v.pairs) {
        dT.push_back(pair_delta(pr, fitted));
        dV.push_back(1.0);  // every pair is visually one anchor unit
    }
    try {
        fit.stress = stress(dT, dV);
    } catch (const std::domain_error&) {
        fit.stress = 100.0;
    }
    return fit;
}

LooStats loo_cross_validation(const VisualPairSet& v, const AlphaParams& params0) {
    v.validate();
    if (v.pairs.size() < 3)
        throw std::invalid_argument("loo_cross_validation: need >= 3 pairs for folds");

    LooStats stats;
    std::vector<double> dis, ps, qs;
    for (std::size_t hold = 0; hold < v.pairs.size(); ++hold) {
        if (hold == v.anchor_index) continue;
        VisualPairSet sub;
        for (std::size_t i = 0; i < v.pairs.size(); ++i) {
            if (i == hold) continue;
            if (i == v.anchor_index) sub.anchor_index = sub.pairs.size();
            sub.pairs.push_back(v.pairs[i]);
        }
        const PsychoFit fit = fit_psychometric_params(sub, params0);
        const AlphaParams fitted{fit.p, fit.q, params0.c};
        const double anchor = pair_delta(v.pairs[v.anchor_index], fitted);
        dis.push_back(std::abs(pair_delta(v.pairs[hold], fitted) - anchor));
        ps.push_back(fit.p);
        qs.push_back(fit.q);
    }

    stats.folds = dis.size();
    const double n = static_cast<double>(dis.size());
    stats.mean_disagreement = std::accumulate(dis.begin(), dis.end(), 0.0) / n;
    double var = 0.0;
    for (double d : dis) var += (d - stats.mean_disagreement) * (d - stats.mean_disagreement);
    stats.std_disagreement = dis.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    stats.max_disagreement = *std::max_element(dis.begin(), dis.end());
    stats.p_min = *std::min_element(ps.begin(), ps.end());
    stats.p_max = *std::max_element(ps.begin(), ps.end());
    stats.p_mean = std::accumulate(ps.begin(), ps.end(), 0.0) / n;
    stats.q_min = *std::min_element(qs.begin(), qs.end());
    stats.q_max = *std::max_element(qs.begin(), qs.end());
    stats.q_mean = std::accumulate(qs.begin(), qs.end(), 0.0) / n;
    return stats;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_num(const std::string& s, const std::string& where) {
    try {
        std::size_t pos;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(where + ": malformed number '" + s + "'");
    }
}

std::string chomp(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

std::vector<TrialSeries> read_trials_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    if (!std::getline(in, line) || chomp(line) != "observer,direction,level,response")
        throw std::runtime_error(source_name + ": expected header observer,direction,level,response");

    struct Block {
        std::vector<std::string> observers;  // first-appearance order
        std::map<std::string, std::map<double, int>> data;
    };
    std::map<std::string, Block> dirs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = chomp(line);
        if (line.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        const auto f = split_csv(line);
        if (f.size() != 4) throw std::runtime_error(where + ": expected 4 fields");
        if (f[1] != "increasing" && f[1] != "decreasing")
            throw std::runtime_error(where + ": direction must be increasing or decreasing");
        const double level = parse_num(f[2], where);
        const double resp = parse_num(f[3], where);
        if (resp != 0.0 && resp != 1.0)
            throw std::runtime_error(where + ": response must be 0 or 1");
        Block& b = dirs[f[1]];
        if (b.data.find(f[0]) == b.data.end()) b.observers.push_back(f[0]);
        if (!b.data[f[0]].emplace(level, static_cast<int>(resp)).second)
            throw std::runtime_error(where + ": duplicate (observer, level) entry");
    }
    if (dirs.empty()) throw std::runtime_error(source_name + ": no trial rows");

    std::vector<TrialSeries> out;
    for (auto& [name, b] : dirs) {
        TrialSeries s;
        s.direction = name == "increasing" ? TrialSeries::Direction::increasing
                                           : TrialSeries::Direction::decreasing;
        for (const auto& [lvl, _] : b.data.begin()->second) s.levels.push_back(lvl);
        for (const auto& obs : b.observers) {
            const auto& row = b.data[obs];
            if (row.size() != s.levels.size())
                throw std::runtime_error(source_name + ": observer '" + obs +
                                         "' has a different level set");
            std::vector<int> r;
            for (double lvl : s.levels) {
                const auto it = row.find(lvl);
                if (it == row.end())
                    throw std::runtime_error(source_name + ": observer '" + obs +
                                             "' is missing a level");
                r.push_back(it->second);
            }
            s.responses.push_back(std::move(r));
        }
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TrialSeries> read_trials_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_trials_csv(in, path);
}

VisualPairSet read_pairs_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    if (!std::getline(in, line) || chomp(line) != "sa1,ss1,sa2,ss2,is_anchor")
        throw std::runtime_error(source_name + ": expected header sa1,ss1,sa2,ss2,is_anchor");
    VisualPairSet v;
    bool have_anchor = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = chomp(line);
        if (line.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        const auto f = split_csv(line);
        if (f.size() != 5) throw std::runtime_error(where + ": expected 5 fields");
        MaterialPair pr;
        pr.first = {parse_num(f[0], where), parse_num(f[1], where)};
        pr.second = {parse_num(f[2], where), parse_num(f[3], where)};
        const double anchor = parse_num(f[4], where);
        if (anchor != 0.0 && anchor != 1.0)
            throw std::runtime_error(where + ": is_anchor must be 0 or 1");
        if (anchor == 1.0) {
            if (have_anchor) throw std::runtime_error(where + ": multiple anchor rows");
            have_anchor = true;
            v.anchor_index = v.pairs.size();
        }
        v.pairs.push_back(pr);
    }
    if (!have_anchor) throw std::runtime_error(source_name + ": no anchor row");
    v.validate();
    return v;
}

VisualPairSet read_pairs_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_pairs_csv(in, path);
}

}  // namespace tscale
