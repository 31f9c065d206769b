// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one [PASS]/[FAIL] line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "twostage/coupling.hpp"
#include "twostage/montecarlo.hpp"
#include "twostage/stats.hpp"
#include "twostage/varest.hpp"
#include "oracle.hpp"

using namespace twostage;

namespace {

constexpr std::uint64_t kMasterSeed = 20250811;

struct Harness {
    int failures = 0;

    void report(int criterion, const std::string& label, bool pass, const std::string& detail) {
        std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion,
                    label.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Population tiny_population() {
    return build_population({{1, 2, 3}, {4, 5, 6}, {7, 8, 10}, {2, 1, 5}});
}

TwoStageDesign tiny_design(const Population& pop, bool rejective_first) {
    TwoStageDesign d;
    if (rejective_first) d.first = Design::rejective({0.3, 0.4, 0.6, 0.7}, 2);
    else d.first = Design::srswor(4, 2);
    for (int i = 0; i < pop.psu_count(); ++i)
        d.second.push_back(Design::srswor(pop.psu(i).size(), 2));
    return d;
}

std::vector<InclusionView> second_views(const TwoStageDesign& d, const TwoStageSample& s) {
    std::vector<InclusionView> v;
    for (int i : s.psus) v.push_back(d.second[std::size_t(i)].view());
    return v;
}

bool relative_close(double a, double b, double tol) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= tol * scale;
}

// ---------------------------------------------------------------------------

void criterion_1(Harness& h) {
    const auto start = std::chrono::steady_clock::now();
    const Population pop = tiny_population();
    const double y = population_total(pop);
    bool pass = true;
    std::ostringstream detail;

    for (bool rejective : {false, true}) {
        const TwoStageDesign d = tiny_design(pop, rejective);
        const VarianceDecomposition dec = exact_variance(pop, d);
        const InclusionView first = d.first_view();

        double e_ht = 0.0, e_vht = 0.0, e_vyg = 0.0;
        double e_ht_a = 0.0, e_ht_b = 0.0, e_yg_a = 0.0, e_yg_b = 0.0;
        testing::for_each_two_stage_outcome(pop, d, [&](const TwoStageSample& s, double p) {
            e_ht += p * ht_estimate(s, pop);
            const VarEstimate ht = vhat_ht(s, pop, first, second_views(d, s));
            const VarEstimate yg = vhat_yg(s, pop, first, second_views(d, s));
            e_vht += p * ht.total;
            e_ht_a += p * ht.a_term;
            e_ht_b += p * ht.b_term;
            e_vyg += p * yg.total;
            e_yg_a += p * yg.a_term;
            e_yg_b += p * yg.b_term;
        });

        const bool ok = relative_close(e_ht, y, 1e-9) &&
                        relative_close(e_vht, dec.total(), 1e-9) &&
                        relative_close(e_vyg, dec.total(), 1e-9) &&
                        relative_close(e_ht_a, dec.v1 + dec.v2, 1e-9) &&
                        relative_close(e_ht_b, dec.v3, 1e-9) &&
                        relative_close(e_yg_a, dec.v1 + dec.v2, 1e-9) &&
                        relative_close(e_yg_b, dec.v3, 1e-9);
        if (!ok) pass = false;
        detail << (rejective ? "rejective" : "srswor") << ": E[Yhat]-Y rel "
               << std::fabs(e_ht - y) / y << "; ";
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 1.0) pass = false;
    detail << "elapsed " << elapsed << "s";
    h.report(1, "enumerated unbiasedness of the estimator and both variance estimators",
             pass, detail.str());
}

void criterion_2(Harness& h) {
    bool pass = true;
    std::ostringstream detail;
    double worst = 0.0;

    const Population pop = tiny_population();
    std::vector<TwoStageDesign> fixtures;
    fixtures.push_back(tiny_design(pop, false));
    fixtures.push_back(tiny_design(pop, true));
    {
        TwoStageDesign d;
        d.first = Design::sampford({0.3, 0.4, 0.6, 0.7}, 2);
        for (int i = 0; i < 4; ++i) d.second.push_back(Design::srswor(3, 2));
        fixtures.push_back(std::move(d));
    }
    {
        TwoStageDesign d;
        d.first = Design::srswor(4, 3);
        for (int i = 0; i < 4; ++i) d.second.push_back(Design::poisson({0.4, 0.6, 0.5}));
        fixtures.push_back(std::move(d));
    }
    {
        TwoStageDesign d;  // stratified first stage
        d.strata.push_back({{0, 1}, Design::srswor(2, 1)});
        d.strata.push_back({{2, 3}, Design::rejective({0.8, 0.2}, 1)});
        for (int i = 0; i < 4; ++i) d.second.push_back(Design::srswor(3, 2));
        fixtures.push_back(std::move(d));
    }

    for (const auto& d : fixtures) {
        const VarianceDecomposition dec = exact_variance(pop, d);
        const auto pi = d.first_order();
        double expected = 0.0;
        for (int i = 0; i < 4; ++i)
            expected += within_psu_variance(pop.psu(i), d.second[std::size_t(i)]) / pi[std::size_t(i)];
        const double rel = std::fabs(dec.v2 + dec.v3 - expected) /
                           std::max({1.0, std::fabs(expected)});
        worst = std::max(worst, rel);
        if (rel > 1e-9) pass = false;
    }
    detail << fixtures.size() << " fixtures, worst relative error " << worst;
    h.report(2, "v2 + v3 equals the summed within-PSU variances over first-order weights",
             pass, detail.str());
}

void criterion_3(Harness& h) {
    bool pass = true;
    std::ostringstream detail;

    struct Case {
        std::vector<double> targets;
        int n;
    };
    std::vector<Case> cases;
    cases.push_back({{0.2, 0.4, 0.6, 0.8}, 2});
    cases.push_back({{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.5}, 5});
    {
        // sizes 1..20 with probabilities proportional to size
        std::vector<double> sizes(20);
        for (int i = 0; i < 20; ++i) sizes[std::size_t(i)] = double(i + 1);
        cases.push_back({proportional_to_size_pi(sizes, 6), 6});
    }

    for (const auto& c : cases) {
        const auto start = std::chrono::steady_clock::now();
        const CalibrationResult cal = calibrate_rejective(c.targets, c.n);
        const auto e = Design::rejective_with_working(cal.working, c.n).enumerate();
        const auto pi = enumerated_first_order(e);
        double worst = 0.0;
        for (std::size_t i = 0; i < c.targets.size(); ++i)
            worst = std::max(worst, std::fabs(pi[i] - c.targets[i]));
        const double elapsed = seconds_since(start);
        if (worst > 1e-8 || elapsed >= 1.0) pass = false;
        detail << "N=" << c.targets.size() << ": max |pi - target| " << worst << " in "
               << elapsed << "s; ";
    }
    h.report(3, "calibrated conditional-poisson designs reproduce their target probabilities",
             pass, detail.str());
}

// Published baseline metrics of the desk-scale study, population 3 layout:
// icc, n_I, n_i, RB[haj_a], RB[haj], RS[haj_a], RS[haj], CI[haj_a], CI[haj].
struct BaselineCell {
    double icc;
    int n_psu, n_ssu;
    double rb_a, rb, rs_a, rs, ci_a, ci;
};
constexpr BaselineCell kBaseline[] = {
    {0.1, 20, 5, 0.08, 0.70, 33.58, 33.59, 0.94, 0.94},
    {0.1, 20, 10, -0.98, -0.57, 31.30, 31.30, 0.93, 0.93},
    {0.1, 40, 5, -1.00, 0.24, 21.59, 21.56, 0.94, 0.94},
    {0.1, 40, 10, -2.66, -1.84, 21.85, 21.77, 0.93, 0.93},
    {0.1, 100, 5, -3.23, -0.08, 14.02, 13.64, 0.94, 0.94},
    {0.1, 100, 10, -2.36, -0.27, 14.34, 14.15, 0.95, 0.95},
    {0.1, 200, 5, -6.59, -0.19, 11.17, 9.03, 0.94, 0.94},
    {0.1, 200, 10, -4.15, 0.17, 10.42, 9.57, 0.94, 0.95},
    {0.2, 20, 5, -0.37, 0.05, 33.13, 33.13, 0.93, 0.93},
    {0.2, 20, 10, -0.80, -0.57, 32.03, 32.02, 0.93, 0.93},
    {0.2, 40, 5, -0.82, 0.01, 22.20, 22.18, 0.94, 0.94},
    {0.2, 40, 10, -2.17, -1.71, 21.99, 21.94, 0.93, 0.93},
    {0.2, 100, 5, -2.25, -0.13, 14.07, 13.89, 0.95, 0.95},
    {0.2, 100, 10, -1.75, -0.56, 14.34, 14.25, 0.94, 0.95},
    {0.2, 200, 5, -4.54, -0.17, 10.20, 9.14, 0.94, 0.94},
    {0.2, 200, 10, -2.22, 0.28, 9.96, 9.72, 0.94, 0.94},
    {0.3, 20, 5, -0.72, -0.43, 32.89, 32.88, 0.94, 0.94},
    {0.3, 20, 10, -0.69, -0.54, 32.39, 32.39, 0.93, 0.93},
    {0.3, 40, 5, -0.77, -0.19, 22.58, 22.56, 0.94, 0.94},
    {0.3, 40, 10, -1.85, -1.55, 22.02, 21.99, 0.93, 0.93},
    {0.3, 100, 5, -1.63, -0.14, 14.09, 14.00, 0.95, 0.95},
    {0.3, 100, 10, -1.44, -0.67, 14.29, 14.24, 0.95, 0.95},
    {0.3, 200, 5, -3.26, -0.16, 9.80, 9.25, 0.95, 0.95},
    {0.3, 200, 10, -1.29, 0.32, 9.83, 9.75, 0.95, 0.95},
};

McGrid full_grid() {
    McGrid grid;
    grid.base.population.psu_count = 2000;
    grid.base.population.mean_psu_size = 40;
    grid.base.population.size_cv = 0.06;
    grid.base.first_kind = DesignKind::rejective;
    grid.base.replicates = 1000;
    grid.base.reference_replicates = 50000;
    grid.base.estimators = {VarKind::haj_a, VarKind::haj};
    grid.base.master_seed = kMasterSeed;
    grid.base.workers = 0;
    grid.icc = {0.1, 0.2, 0.3};
    grid.n_psu_sample = {20, 40, 100, 200};
    grid.n_ssu_sample = {5, 10};
    return grid;
}

const EstimatorMetrics& metric_of(const McReport& r, VarKind k) {
    for (const auto& m : r.metrics)
        if (m.kind == k) return m;
    throw std::logic_error("metric not found");
}

void criterion_4(const std::vector<McReport>& reports, Harness& h) {
    bool pass = true;
    std::ostringstream detail;
    int checked = 0;
    for (std::size_t c = 0; c < std::size(kBaseline); ++c) {
        const BaselineCell& b = kBaseline[c];
        const McReport& r = reports[c];
        if (std::fabs(r.icc - b.icc) > 1e-9 || r.n_psu_sample != b.n_psu ||
            r.n_ssu_sample != b.n_ssu) {
            pass = false;
            detail << "cell order mismatch at " << c << "; ";
            continue;
        }
        const EstimatorMetrics& haj = metric_of(r, VarKind::haj);
        const EstimatorMetrics& haj_a = metric_of(r, VarKind::haj_a);
        ++checked;
        auto cell_fail = [&](const char* what, double got, double want, double tol) {
            pass = false;
            detail << "icc=" << b.icc << " n_I=" << b.n_psu << " n_i=" << b.n_ssu << " " << what
                   << "=" << got << " (baseline " << want << ", tol " << tol << "); ";
        };
        if (std::fabs(haj.rb_pct) > 3.0) cell_fail("rb[haj]", haj.rb_pct, 0.0, 3.0);
        if (std::fabs(haj_a.rb_pct - b.rb_a) > 3.0) cell_fail("rb[haj_a]", haj_a.rb_pct, b.rb_a, 3.0);
        if (haj.coverage < 0.92 || haj.coverage > 0.96) cell_fail("ci[haj]", haj.coverage, b.ci, 0.02);
        if (haj_a.coverage < 0.92 || haj_a.coverage > 0.96)
            cell_fail("ci[haj_a]", haj_a.coverage, b.ci_a, 0.02);
        if (std::fabs(haj.rs_pct - b.rs) > 5.0) cell_fail("rs[haj]", haj.rs_pct, b.rs, 5.0);
        if (std::fabs(haj_a.rs_pct - b.rs_a) > 5.0) cell_fail("rs[haj_a]", haj_a.rs_pct, b.rs_a, 5.0);
    }
    detail << checked << " cells checked";
    h.report(4, "full-grid replication of the published bias/stability/coverage table", pass,
             detail.str());
}

// standard error of a reported relative bias, in percentage points
double rb_se(const McReport& r, const EstimatorMetrics& m) {
    const double var_pct = std::max(0.0, m.rs_pct * m.rs_pct - m.rb_pct * m.rb_pct);
    const double se_mean = std::sqrt(var_pct / double(r.replicates));
    const double se_ref = 100.0 * std::sqrt(2.0 / double(r.reference_replicates - 1));
    return std::sqrt(se_mean * se_mean + se_ref * se_ref);
}

void criterion_5(const std::vector<McReport>& reports, Harness& h) {
    bool pass = true;
    std::ostringstream detail;
    double pooled_drop = 0.0;

    for (double icc : {0.1, 0.2, 0.3}) {
        std::vector<const McReport*> cells;
        for (const auto& r : reports)
            if (std::fabs(r.icc - icc) < 1e-9 && r.n_ssu_sample == 5) cells.push_back(&r);
        // grid order guarantees ascending n_I
        for (std::size_t k = 0; k + 1 < cells.size(); ++k) {
            const EstimatorMetrics& a = metric_of(*cells[k], VarKind::haj_a);
            const EstimatorMetrics& b = metric_of(*cells[k + 1], VarKind::haj_a);
            const double slack =
                3.0 * std::sqrt(std::pow(rb_se(*cells[k], a), 2) + std::pow(rb_se(*cells[k + 1], b), 2));
            if (b.rb_pct > a.rb_pct + slack) {
                pass = false;
                detail << "icc=" << icc << ": rb rose from " << a.rb_pct << " (n_I="
                       << cells[k]->n_psu_sample << ") to " << b.rb_pct << " beyond slack " << slack
                       << "; ";
            }
        }
        pooled_drop += metric_of(*cells.back(), VarKind::haj_a).rb_pct -
                       metric_of(*cells.front(), VarKind::haj_a).rb_pct;

        for (const McReport* r : cells) {
            const EstimatorMetrics& haj = metric_of(*r, VarKind::haj);
            if (std::fabs(haj.rb_pct) > 3.0) {
                pass = false;
                detail << "icc=" << icc << " n_I=" << r->n_psu_sample << ": rb[haj]=" << haj.rb_pct
                       << "; ";
            }
        }
    }
    pooled_drop /= 3.0;
    if (!(pooled_drop < 0.0)) {
        pass = false;
        detail << "pooled drop " << pooled_drop << " not negative; ";
    }
    detail << "pooled rb[haj_a] drop from n_I=20 to 200: " << pooled_drop;
    h.report(5, "the simplified estimator grows more pessimistic with the sampling fraction "
                "while the full one stays centered",
             pass, detail.str());
}

void criterion_6(const std::vector<McReport>& reports, Harness& h) {
    // exact within-PSU contributions per cell, same populations as the grid
    bool pass = true;
    std::ostringstream detail;

    for (double icc : {0.1, 0.2, 0.3}) {
        McScenario sc = full_grid().base;
        sc.population.icc = icc;
        sc.population.seed = derive_seed(kMasterSeed, 0, kTagPopulation);
        const Population pop = generate_sim_population(sc.population);
        const double n_units = double(pop.unit_count());

        std::vector<double> normalized;
        for (const auto& r : reports) {
            if (std::fabs(r.icc - icc) > 1e-9 || r.n_ssu_sample != 5) continue;
            McScenario cell = sc;
            cell.n_psu_sample = r.n_psu_sample;
            cell.n_ssu_sample = r.n_ssu_sample;
            const TwoStageDesign d = scenario_design(cell, pop);
            const auto pi = d.first_order();
            double second_part = 0.0;
            for (int i = 0; i < pop.psu_count(); ++i)
                second_part +=
                    within_psu_variance(pop.psu(i), d.second[std::size_t(i)]) / pi[std::size_t(i)];
            const double v1 = r.reference_variance - second_part;
            normalized.push_back(v1 * double(r.n_psu_sample) / (n_units * n_units));
        }
        const auto [lo, hi] = std::minmax_element(normalized.begin(), normalized.end());
        const double ratio = *hi / *lo;
        detail << "icc=" << icc << ": spread " << ratio << "; ";
        if (!(ratio < 2.0)) pass = false;
    }
    h.report(6, "normalized first-stage variance is stable across first-stage sizes", pass,
             detail.str());
}

void criterion_7(Harness& h) {
    bool pass = true;
    std::ostringstream detail;

    const Population pop = build_population({{3, 1, 2}, {5, 2, 2}, {4, 4, 3}, {1, 6, 2},
                                             {2, 2, 2}, {7, 1, 3}, {3, 3, 5}, {2, 4, 4}});
    const std::vector<double> targets{0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55};
    const EnumeratedDesign p = Design::sampford(targets, 3).enumerate();
    const EnumeratedDesign p_r = Design::rejective(targets, 3).enumerate();
    const Coupling coupling(p, p_r);

    std::vector<Design> census_second(8, Design::census(3));
    std::vector<Design> srswor_second(8, Design::srswor(3, 2));

    {
        RngStream rng(derive_seed(kMasterSeed, 1, kTagReplicate));
        const int draws = 100000;
        std::map<std::vector<int>, int> counts_p, counts_r;
        int shared = 0;
        for (int t = 0; t < draws; ++t) {
            const CoupledPair pair = coupling.draw(census_second, pop, rng);
            ++counts_p[pair.sample_p.psus];
            ++counts_r[pair.sample_r.psus];
            if (pair.shared) ++shared;
        }
        auto gof = [&](const std::map<std::vector<int>, int>& counts, const EnumeratedDesign& d) {
            double stat = 0.0;
            for (std::size_t s = 0; s < d.samples.size(); ++s) {
                const double expected = d.probs[s] * draws;
                const auto it = counts.find(d.samples[s]);
                const int observed = it == counts.end() ? 0 : it->second;
                stat += (observed - expected) * (observed - expected) / expected;
            }
            return chi_square_upper_tail(stat, double(d.samples.size() - 1));
        };
        const double pv_p = gof(counts_p, p);
        const double pv_r = gof(counts_r, p_r);
        const double alpha = coupling.dist().alpha;
        const double freq = double(shared) / draws;
        const double sigma = std::sqrt(alpha * (1.0 - alpha) / draws);
        detail << "gof p-values " << pv_p << " / " << pv_r << "; shared freq dev "
               << std::fabs(freq - alpha) / sigma << " sigma; ";
        if (pv_p <= 1e-3 || pv_r <= 1e-3) pass = false;
        if (std::fabs(freq - alpha) > 3.0 * sigma) pass = false;
    }

    int fixture_id = 2;
    for (const auto& second : {census_second, srswor_second}) {
        RngStream rng(derive_seed(kMasterSeed, std::uint64_t(fixture_id++), kTagReplicate));
        const GapResult g = coupling_gap(p, p_r, second, pop, 50000, rng);
        detail << "gap " << g.empirical << " vs bound " << g.bound << " (se " << g.mc_se << "); ";
        if (g.empirical > g.bound + 3.0 * g.mc_se) pass = false;
    }
    h.report(7, "coupled draws keep both marginal laws and respect the mean-square gap bound",
             pass, detail.str());
}

void criterion_8(const std::vector<McReport>& reports, Harness& h) {
    bool pass = true;
    std::ostringstream detail;
    for (const auto& r : reports) {
        if (r.n_psu_sample != 200) continue;
        std::vector<double> z;
        z.reserve(r.estimates.size());
        const double sd = std::sqrt(r.reference_variance);
        for (double e : r.estimates) z.push_back((e - r.y_true) / sd);
        const double a2 = anderson_darling_statistic(z);
        const double pv = anderson_darling_pvalue(a2, z.size());
        detail << "icc=" << r.icc << " n_i=" << r.n_ssu_sample << ": p=" << pv << "; ";
        if (pv <= 1e-3) pass = false;
    }
    h.report(8, "standardized estimator errors look normal at the largest first-stage size",
             pass, detail.str());
}

void criterion_9(Harness& h) {
    const std::string dir = "/tmp/twostage_acceptance";
    if (std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str()) != 0) std::abort();
    {
        std::ofstream scenario(dir + "/scenario.json");
        scenario << R"({
            "population": {"psu_count": 120, "mean_psu_size": 10, "size_cv": 0.05},
            "first_kind": "rejective",
            "grid": {"icc": [0.2, 0.3], "n_psu_sample": [6, 12], "n_ssu_sample": [2]},
            "replicates": 60,
            "reference_replicates": 400
        })";
    }
    const std::string base = std::string(TWOSTAGE_CLI) + " mc --scenario " + dir +
                             "/scenario.json --seed 42";
    const int rc1 = std::system((base + " --workers 1 --out " + dir + "/w1.csv >/dev/null 2>&1").c_str());
    const int rc2 = std::system((base + " --workers 2 --out " + dir + "/w2.csv >/dev/null 2>&1").c_str());

    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    const std::string a = slurp(dir + "/w1.csv");
    const std::string b = slurp(dir + "/w2.csv");
    const bool pass = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
    std::ostringstream detail;
    detail << a.size() << " bytes, " << (a == b ? "identical" : "DIFFERENT");
    h.report(9, "the mc subcommand is byte-identical across worker counts", pass, detail.str());
}

}  // namespace

int main() {
    Harness h;
    const auto start = std::chrono::steady_clock::now();

    criterion_1(h);
    criterion_2(h);
    criterion_3(h);

    std::printf("running the full study grid (24 cells, 1000 replicates, 50000 reference draws each)...\n");
    std::fflush(stdout);
    const GridResult grid = run_grid(full_grid());
    std::printf("%s", emit_table_text(grid.reports).c_str());

    criterion_4(grid.reports, h);
    criterion_5(grid.reports, h);
    criterion_6(grid.reports, h);
    criterion_7(h);
    criterion_8(grid.reports, h);
    criterion_9(h);

    std::printf("acceptance finished in %.1fs with %d failure(s)\n", seconds_since(start),
                h.failures);
    return h.failures;
}
