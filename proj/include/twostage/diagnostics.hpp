#pragma once

#include <optional>

#include "twostage/twostage.hpp"

namespace twostage {

// Observable constants behind the regularity conditions of the two stages and
// of the study variable, for one population/design pair. Quantities that need
// unavailable higher-order inclusion probabilities are left absent.
struct AssumptionReport {
    // first stage
    double first_fraction = 0.0;        // n_I / N_I
    double first_pi_ratio_min = 0.0;    // min/max of N_I pi_Ii / n_I
    double first_pi_ratio_max = 0.0;
    std::optional<double> first_pair_dependence;   // max |pi_Iij - pi_Ii pi_Ij|
    std::optional<double> first_quad_dependence;   // max |pi_Iijkl - pi pi pi pi|
    std::optional<double> first_pair_ratio_min;    // min/max of pi_Iij N_I^2 / n_I^2
    std::optional<double> first_pair_ratio_max;

    // second stage (extremes over PSUs)
    double mean_psu_size = 0.0;         // N_0
    double mean_ssu_sample = 0.0;       // n_0
    double size_ratio_min = 0.0;        // N_i / N_0
    double size_ratio_max = 0.0;
    double sample_ratio_min = 0.0;      // n_i / n_0
    double sample_ratio_max = 0.0;
    double second_pi_ratio_min = 0.0;   // N_0 pi_{k|i} / n_0
    double second_pi_ratio_max = 0.0;
    std::optional<double> second_pair_dependence;
    std::optional<double> second_pair_ratio_min;
    std::optional<double> second_pair_ratio_max;

    // study variable
    double value_mean = 0.0;            // N^-1 sum y
    double value_fourth_moment = 0.0;   // N^-1 sum y^4

    std::optional<double> normalized_first_variance;  // N^-2 n_I V1

    bool first_fraction_ok = false;     // n_I / N_I < 1
    std::optional<bool> joint_positive; // all first-stage pi_ij > 0, when known
};

// `first_table` may supply first-stage joint probabilities when the design has
// no closed form; `v1` may supply a reference first-stage variance when the
// exact one is not computable.
AssumptionReport check_assumptions(const Population& pop, const TwoStageDesign& design,
                                   const InclusionTable* first_table = nullptr,
                                   std::optional<double> v1 = std::nullopt);

}  // namespace twostage
