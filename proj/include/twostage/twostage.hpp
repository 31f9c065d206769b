#pragma once

#include <optional>
#include <vector>

#include "twostage/designs.hpp"
#include "twostage/population.hpp"

namespace twostage {

struct StratumSpec {
    std::vector<int> psus;  // global PSU indices of the stratum
    Design design;          // first-stage design over those PSUs
};

// First-stage design over the PSUs (single or stratified) combined with an
// invariant, independent second-stage design per PSU.
struct TwoStageDesign {
    std::optional<Design> first;     // used when strata is empty
    std::vector<StratumSpec> strata; // per-stratum first stages
    std::vector<Design> second;      // one design per PSU

    int psu_count() const { return int(second.size()); }
    bool stratified() const { return !strata.empty(); }
    bool first_fixed_size() const;
    int first_sample_size() const;              // total n_I across strata
    std::vector<double> first_order() const;    // global first-stage pi
    InclusionView first_view(int limit = Design::kDefaultEnumerationLimit) const;
    void validate(const Population& pop) const;
};

struct TwoStageSample {
    std::vector<int> psus;                       // selected PSUs, ascending
    std::vector<std::vector<int>> ssus;          // per selected PSU, ascending
    std::vector<double> first_pi;                // aligned with psus
    std::vector<std::vector<double>> second_pi;  // aligned with ssus
};

struct VarianceDecomposition {
    double v1 = 0.0;  // first-stage component (signed double sum, not clamped)
    double v2 = 0.0;
    double v3 = 0.0;
    double total() const { return v1 + v2 + v3; }
};

TwoStageSample draw_two_stage(const Population& pop, const TwoStageDesign& design, RngStream& rng);

// Estimated sub-total of one selected PSU (position sel in sample.psus).
double psu_ht(const TwoStageSample& sample, const Population& pop, int sel);

double ht_estimate(const TwoStageSample& sample, const Population& pop);

// Exact variance of the estimated sub-total of one PSU. Closed form for
// srswor; other kinds are enumerated.
double within_psu_variance(const Psu& psu, const Design& design);

// Exact three-component variance of the HT estimator. The first stage must be
// srswor or enumerable; otherwise use the Monte Carlo reference variance.
VarianceDecomposition exact_variance(const Population& pop, const TwoStageDesign& design);

// Full first-stage support on global PSU indices (product across strata).
EnumeratedDesign enumerate_first_stage(const TwoStageDesign& design,
                                       int limit = Design::kDefaultEnumerationLimit);

}  // namespace twostage
