#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "twostage/twostage.hpp"

namespace twostage {

enum class VarKind { ht, yg, haj, ht_a, yg_a, haj_a };

const char* var_kind_name(VarKind k);
VarKind var_kind_from_name(const std::string& name);
bool var_kind_is_simplified(VarKind k);

struct VarEstimate {
    VarKind kind = VarKind::ht;
    double a_term = 0.0;
    double b_term = 0.0;
    double total = 0.0;
    bool truncated = false;  // haj only
};

struct CiResult {
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.0;  // one-tailed level
    double estimate = 0.0;
};

struct StratifiedProportion {
    double p_hat = 0.0;
    double var_haj = 0.0;
    double var_haj_a = 0.0;
    CiResult ci;
    bool outside_unit_interval = false;
};

// Horvitz-Thompson variance estimator. `first` answers first-stage joint
// probabilities; `second` is aligned with sample.psus and answers the
// within-PSU probabilities. Throws when a required joint probability is zero.
VarEstimate vhat_ht(const TwoStageSample& sample, const Population& pop,
                    const InclusionView& first, std::span<const InclusionView> second);

// Yates-Grundy variance estimator; both stages must be of fixed size.
VarEstimate vhat_yg(const TwoStageSample& sample, const Population& pop,
                    const InclusionView& first, std::span<const InclusionView> second);

// Hajek-type estimator for large-entropy first stages: needs only first-order
// probabilities at stage one. The leading term is set to zero (truncated flag)
// when sum(1-pi) over the sample falls below trunc_coeff * n_I. The within-PSU
// term is the HT one by default, Yates-Grundy on request.
VarEstimate vhat_hajek(const TwoStageSample& sample, const Population& pop,
                       std::span<const InclusionView> second, double trunc_coeff = 0.25,
                       bool yg_within = false);

// Drops the within-PSU term of a two-term estimate.
VarEstimate simplified(const VarEstimate& est);

// estimate +- u_{1-alpha} sqrt(variance); alpha is the one-tailed level.
CiResult confidence_interval(double estimate, double variance, double alpha);

// Proportion of a category under stratified first-stage sampling with
// equal-probability second stages, with the variance of the linearized
// variable (no truncation). `indicator` maps (psu, ssu) to the 0/1 category
// membership.
StratifiedProportion stratified_proportion(const TwoStageSample& sample, const Population& pop,
                                           const std::vector<std::vector<int>>& strata,
                                           const std::function<double(int, int)>& indicator,
                                           double alpha = 0.025);

}  // namespace twostage
