#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twostage/varest.hpp"

namespace twostage {

// One simulation cell: a population (synthetic or given), a first-stage kind
// with probabilities proportional to PSU size, an equal-size srswor second
// stage, and the estimators to evaluate.
struct McScenario {
    SimPopConfig population;
    std::optional<Population> fixed_population;  // overrides the generator
    DesignKind first_kind = DesignKind::rejective;
    int n_psu_sample = 0;  // n_I
    int n_ssu_sample = 0;  // n_i, common to all PSUs
    std::vector<VarKind> estimators = {VarKind::haj_a, VarKind::haj};
    int replicates = 1000;
    double alpha = 0.025;  // one-tailed level of the intervals
    std::uint64_t master_seed = 0;
    int reference_replicates = 50000;
    double trunc_coeff = 0.25;
    int workers = 0;  // 0 = hardware concurrency
};

struct EstimatorMetrics {
    VarKind kind = VarKind::haj;
    bool available = true;
    std::string error;        // when not available
    double rb_pct = 0.0;      // percent relative bias of the variance estimator
    double rs_pct = 0.0;      // percent relative stability
    double coverage = 0.0;    // coverage of the normality-based interval
    double mean_vhat = 0.0;
    int truncated_count = 0;  // haj replicates that hit the truncation branch
    int negative_count = 0;   // replicates with a negative variance estimate
};

struct McReport {
    double icc = 0.0;  // NaN when the population came from a file
    int n_psu_sample = 0;
    int n_ssu_sample = 0;
    int replicates = 0;
    int reference_replicates = 0;
    double y_true = 0.0;
    double reference_variance = 0.0;
    double reference_se = 0.0;  // MC standard error of the reference variance
    double mean_estimate = 0.0;
    std::vector<EstimatorMetrics> metrics;
    std::vector<double> estimates;  // per-replicate HT estimates
};

// Monte Carlo percent relative bias and relative stability of a variance
// estimator against a reference variance.
double relative_bias_pct(const std::vector<double>& vhat, double v_ref);
double relative_stability_pct(const std::vector<double>& vhat, double v_ref);

// Materializes the scenario population (generator or fixed).
Population scenario_population(const McScenario& sc);

// Two-stage design of the scenario over the given population.
TwoStageDesign scenario_design(const McScenario& sc, const Population& pop);

// Sample variance of the HT estimator over independent two-stage draws, with
// its own Monte Carlo standard error (normal approximation).
std::pair<double, double> reference_variance(const Population& pop, const TwoStageDesign& design,
                                             int replicates, std::uint64_t master_seed,
                                             int workers = 0);

// Runs one cell: reference variance plus `replicates` estimation replicates.
// Deterministic for a fixed master seed, independent of the worker count.
McReport run_study(const McScenario& sc);

struct Band {
    double lo = 0.0;
    double hi = 0.0;
};

struct McBands {
    std::map<VarKind, Band> rb;        // percent
    std::map<VarKind, Band> rs;        // percent
    std::map<VarKind, Band> coverage;  // probability
};

struct McGrid {
    McScenario base;
    std::vector<double> icc;
    std::vector<int> n_psu_sample;
    std::vector<int> n_ssu_sample;
    std::optional<McBands> bands;
};

struct GridResult {
    std::vector<McReport> reports;
    std::vector<std::string> violations;
};

// Runs the full grid in row order (icc, then n_I, then n_i). All cells share
// the population structure: the same master seed generates the same PSU sizes
// and unit effects for every icc.
GridResult run_grid(const McGrid& grid);

std::vector<std::string> check_bands(const std::vector<McReport>& reports, const McBands& bands);

std::string emit_table_csv(const std::vector<McReport>& reports);
std::string emit_table_text(const std::vector<McReport>& reports);

// Runs fn(0..count-1) on the given number of workers; any task exception is
// rethrown after all workers join.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace twostage
