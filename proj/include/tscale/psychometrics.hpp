#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "tscale/alpha_model.hpp"

namespace tscale {

// Constant-stimuli trial block for one scan direction. Levels are scattering
// coefficient distances from the center sample; each response is 1 when the
// observer judged the test pair difference larger than the anchor pair.
struct TrialSeries {
    enum class Direction { increasing, decreasing };
    Direction direction = Direction::increasing;
    std::vector<double> levels;                       // strictly increasing
    std::vector<std::vector<int>> responses;          // [observer][level], 0/1

    void validate() const;
};

// Per-observer minimal-Hamming projection onto monotone response sequences
// (either orientation). Ties resolve toward the sequence's later original
// values.
TrialSeries monotone_filter(const TrialSeries& series);

struct ProbitResult {
    double mu = 0.0;
    double sigma = 0.0;
    double t50 = 0.0;    // level with fitted proportion 0.5 (= mu)
    double chi2 = 0.0;
    int dof = 0;         // levels - 2
    bool passed = false; // goodness-of-fit at alpha = 0.05
};

// Maximum-likelihood cumulative-normal fit on pooled per-level proportions.
ProbitResult probit_fit(const TrialSeries& series);

// Standardized residual sum of squares between computed and visual difference
// lists, in [0,100]; invariant to uniform positive scaling of either list.
double stress(const std::vector<double>& dT, const std::vector<double>& dV);

enum class FVerdict { better, poorer, insignificant };

// Two-tailed F test at 95% confidence on the squared STRESS ratio with
// (n-1, n-1) degrees of freedom; `better` means stress_x is significantly
// lower than stress_y.
FVerdict f_test_stress(double stress_x, double stress_y, int n);

struct MaterialPair {
    ReferenceMaterial first, second;
};

// Material pairs judged perceptually equal in difference to the anchor pair.
struct VisualPairSet {
    std::vector<MaterialPair> pairs;
    std::size_t anchor_index = 0;

    void validate() const;
};

struct PsychoFit {
    double p = 0.0;
    double q = 0.0;
    double objective = 0.0;  // sum of squared disagreements with the anchor difference
    double stress = 0.0;     // STRESS of pair differences against the anchor unit
    bool degenerate = false; // anchor-only set: every (p,q) is optimal
};

// Fits (p, q) over p in [0,5], q in (0,3] by minimizing the disagreement of
// pair opacity differences with the anchor difference; coarse 51x51 grid
// followed by simplex refinement. The c constant is taken from params0.
PsychoFit fit_psychometric_params(const VisualPairSet& v, const AlphaParams& params0 = {});

struct LooStats {
    std::size_t folds = 0;
    double mean_disagreement = 0.0;
    double std_disagreement = 0.0;  // sample standard deviation
    double max_disagreement = 0.0;
    double p_min = 0.0, p_mean = 0.0, p_max = 0.0;
    double q_min = 0.0, q_mean = 0.0, q_max = 0.0;
};

// Refits with each non-anchor pair held out and evaluates the held-out pair's
// disagreement with the anchor difference under the refitted parameters.
LooStats loo_cross_validation(const VisualPairSet& v, const AlphaParams& params0 = {});

// CSV ingestion. Trials: header observer,direction,level,response; one series
// per direction present, observers in first-appearance order.
std::vector<TrialSeries> read_trials_csv(std::istream& in,
                                         const std::string& source_name = "<stream>");
std::vector<TrialSeries> read_trials_csv_file(const std::string& path);

// Pairs: header sa1,ss1,sa2,ss2,is_anchor with exactly one anchor row.
VisualPairSet read_pairs_csv(std::istream& in, const std::string& source_name = "<stream>");
VisualPairSet read_pairs_csv_file(const std::string& path);

}  // namespace tscale
