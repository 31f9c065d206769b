#pragma once

#include <vector>

#include "twostage/twostage.hpp"

namespace twostage {

// Distances between two designs seen as distributions over subsets. chi2 and
// kl are +infinity when the second design does not dominate the first.
struct DesignDistances {
    double tv = 0.0;
    double chi2 = 0.0;
    double kl = 0.0;
    double alpha = 1.0;  // 1 - tv
};

DesignDistances distances(const EnumeratedDesign& p, const EnumeratedDesign& p_r);

struct CoupledPair {
    TwoStageSample sample_p;
    TwoStageSample sample_r;
    bool shared = false;  // same first- and second-stage samples for both
};

// Precomputed coupling of two enumerated first-stage designs over the same
// universe. draw() realizes the maximal coupling: with probability alpha both
// samples coincide (including the second stage); otherwise the two samples
// come from the restricted residual distributions, independently.
class Coupling {
public:
    Coupling(EnumeratedDesign p, EnumeratedDesign p_r);

    const DesignDistances& dist() const { return dist_; }
    const std::vector<double>& pi_p() const { return pi_p_; }
    const std::vector<double>& pi_r() const { return pi_r_; }

    CoupledPair draw(const std::vector<Design>& second, const Population& pop,
                     RngStream& rng) const;

private:
    std::vector<std::vector<int>> samples_;  // union support
    std::vector<double> p_, r_;
    DesignDistances dist_;
    std::vector<double> shared_cum_, p_only_cum_, r_only_cum_;
    std::vector<double> pi_p_, pi_r_;
};

CoupledPair coupled_draw(const EnumeratedDesign& p, const EnumeratedDesign& p_r,
                         const std::vector<Design>& second, const Population& pop,
                         RngStream& rng);

struct GapResult {
    double empirical = 0.0;  // mean of (Yhat_p - Yhat_r)^2 over the replicates
    double mc_se = 0.0;      // Monte Carlo standard error of that mean
    double bound = 0.0;      // enumerated upper bound
};

// Empirical mean-square gap between the two coupled estimators, against the
// exact bound sum |p - p_r| { (sum_{i in s} Y_i/pi_i - Y)^2 + sum V_i/pi_i^2 }.
GapResult coupling_gap(const EnumeratedDesign& p, const EnumeratedDesign& p_r,
                       const std::vector<Design>& second, const Population& pop,
                       int replicates, RngStream& rng);

}  // namespace twostage
