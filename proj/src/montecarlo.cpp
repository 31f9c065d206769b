#include "twostage/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "twostage/stats.hpp"

namespace twostage {

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) workers = int(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double relative_bias_pct(const std::vector<double>& vhat, double v_ref) {
    if (vhat.empty() || !(v_ref > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double v : vhat) mean += v;
    mean /= double(vhat.size());
    return (mean - v_ref) / v_ref * 100.0;
}

double relative_stability_pct(const std::vector<double>& vhat, double v_ref) {
    if (vhat.empty() || !(v_ref > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double mse = 0.0;
    for (double v : vhat) mse += (v - v_ref) * (v - v_ref);
    mse /= double(vhat.size());
    return std::sqrt(mse) / v_ref * 100.0;
}

Population scenario_population(const McScenario& sc) {
    if (sc.fixed_population) return *sc.fixed_population;
    return generate_sim_population(sc.population);
}

TwoStageDesign scenario_design(const McScenario& sc, const Population& pop) {
    const int n_psu = pop.psu_count();
    if (sc.n_psu_sample < 1 || sc.n_psu_sample > n_psu)
        throw std::invalid_argument("scenario: n_psu_sample must lie in [1, N_I]");
    int min_size = pop.psu(0).size();
    for (int i = 1; i < n_psu; ++i) min_size = std::min(min_size, pop.psu(i).size());
    if (sc.n_ssu_sample < 1 || sc.n_ssu_sample > min_size)
        throw std::invalid_argument("scenario: n_ssu_sample must lie in [1, min PSU size]");

    std::vector<double> sizes(static_cast<std::size_t>(n_psu));
    for (int i = 0; i < n_psu; ++i) sizes[std::size_t(i)] = double(pop.psu(i).size());

    TwoStageDesign d;
    switch (sc.first_kind) {
        case DesignKind::srswor:
            d.first = Design::srswor(n_psu, sc.n_psu_sample);
            break;
        case DesignKind::rejective:
            d.first = Design::rejective(proportional_to_size_pi(sizes, sc.n_psu_sample),
                                        sc.n_psu_sample);
            break;
        case DesignKind::sampford:
            d.first = Design::sampford(proportional_to_size_pi(sizes, sc.n_psu_sample),
                                       sc.n_psu_sample);
            break;
        case DesignKind::poisson:
            d.first = Design::poisson(proportional_to_size_pi(sizes, sc.n_psu_sample));
            break;
    }
    d.second.reserve(std::size_t(n_psu));
    for (int i = 0; i < n_psu; ++i)
        d.second.push_back(Design::srswor(pop.psu(i).size(), sc.n_ssu_sample));
    return d;
}

std::pair<double, double> reference_variance(const Population& pop, const TwoStageDesign& design,
                                             int replicates, std::uint64_t master_seed,
                                             int workers) {
    if (replicates < 2)
        throw std::invalid_argument("reference_variance: at least two replicates are required");
    design.validate(pop);

    std::vector<double> estimates(static_cast<std::size_t>(replicates));
    parallel_for(replicates, workers, [&](int r) {
        RngStream rng(derive_seed(master_seed, std::uint64_t(r), kTagReference));
        const TwoStageSample s = draw_two_stage(pop, design, rng);
        estimates[std::size_t(r)] = ht_estimate(s, pop);
    });

    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= double(replicates);
    double ss = 0.0;
    for (double e : estimates) ss += (e - mean) * (e - mean);
    const double var = ss / double(replicates - 1);
    const double se = var * std::sqrt(2.0 / double(replicates - 1));
    return {var, se};
}

namespace {

struct ReplicateRow {
    double estimate = 0.0;
    // per requested estimator: variance total (NaN when unavailable)
    std::vector<double> totals;
    std::vector<bool> truncated;
};

bool needs_joint_first(VarKind k) {
    return k == VarKind::ht || k == VarKind::ht_a || k == VarKind::yg || k == VarKind::yg_a;
}

}  // namespace

McReport run_study(const McScenario& sc) {
    if (sc.replicates < 1) throw std::invalid_argument("run_study: replicates must be >= 1");
    if (sc.estimators.empty()) throw std::invalid_argument("run_study: no estimators requested");

    const Population pop = scenario_population(sc);
    const TwoStageDesign design = scenario_design(sc, pop);
    const double y_true = population_total(pop);

    McReport report;
    report.icc = sc.fixed_population ? std::numeric_limits<double>::quiet_NaN() : sc.population.icc;
    report.n_psu_sample = sc.n_psu_sample;
    report.n_ssu_sample = sc.n_ssu_sample;
    report.replicates = sc.replicates;
    report.reference_replicates = sc.reference_replicates;
    report.y_true = y_true;

    std::tie(report.reference_variance, report.reference_se) =
        reference_variance(pop, design, sc.reference_replicates, sc.master_seed, sc.workers);

    // First-stage joint probabilities, if any requested estimator needs them.
    std::optional<InclusionView> first_view;
    std::string first_view_error;
    if (std::any_of(sc.estimators.begin(), sc.estimators.end(), needs_joint_first)) {
        try {
            first_view = design.first_view();
        } catch (const std::exception& e) {
            first_view_error = e.what();
        }
    }

    const std::size_t n_est = sc.estimators.size();
    std::vector<ReplicateRow> rows(std::size_t(sc.replicates));

    const bool want_haj = std::any_of(sc.estimators.begin(), sc.estimators.end(), [](VarKind k) {
        return k == VarKind::haj || k == VarKind::haj_a;
    });
    const bool want_ht = std::any_of(sc.estimators.begin(), sc.estimators.end(), [](VarKind k) {
        return k == VarKind::ht || k == VarKind::ht_a;
    });
    const bool want_yg = std::any_of(sc.estimators.begin(), sc.estimators.end(), [](VarKind k) {
        return k == VarKind::yg || k == VarKind::yg_a;
    });

    parallel_for(sc.replicates, sc.workers, [&](int r) {
        RngStream rng(derive_seed(sc.master_seed, std::uint64_t(r), kTagReplicate));
        const TwoStageSample s = draw_two_stage(pop, design, rng);

        ReplicateRow row;
        row.estimate = ht_estimate(s, pop);
        row.totals.assign(n_est, std::numeric_limits<double>::quiet_NaN());
        row.truncated.assign(n_est, false);

        std::vector<InclusionView> second;
        second.reserve(s.psus.size());
        for (std::size_t j = 0; j < s.psus.size(); ++j)
            second.push_back(InclusionView::srswor(pop.psu(s.psus[j]).size(), int(s.ssus[j].size())));

        std::optional<VarEstimate> haj, ht, yg;
        if (want_haj) haj = vhat_hajek(s, pop, second, sc.trunc_coeff);
        if (want_ht && first_view) ht = vhat_ht(s, pop, *first_view, second);
        if (want_yg && first_view) yg = vhat_yg(s, pop, *first_view, second);

        for (std::size_t k = 0; k < n_est; ++k) {
            const VarKind kind = sc.estimators[k];
            const VarEstimate* base = nullptr;
            switch (kind) {
                case VarKind::haj: case VarKind::haj_a: base = haj ? &*haj : nullptr; break;
                case VarKind::ht: case VarKind::ht_a: base = ht ? &*ht : nullptr; break;
                case VarKind::yg: case VarKind::yg_a: base = yg ? &*yg : nullptr; break;
            }
            if (base == nullptr) continue;
            row.totals[k] = var_kind_is_simplified(kind) ? base->a_term : base->total;
            row.truncated[k] = base->truncated;
        }
        rows[std::size_t(r)] = std::move(row);
    });

    report.estimates.reserve(rows.size());
    double mean_est = 0.0;
    for (const auto& row : rows) {
        report.estimates.push_back(row.estimate);
        mean_est += row.estimate;
    }
    report.mean_estimate = mean_est / double(sc.replicates);

    const double u = normal_quantile(1.0 - sc.alpha);
    const double v_ref = report.reference_variance;
    for (std::size_t k = 0; k < n_est; ++k) {
        EstimatorMetrics m;
        m.kind = sc.estimators[k];
        if (needs_joint_first(m.kind) && !first_view) {
            m.available = false;
            m.error = first_view_error.empty()
                          ? "first-stage joint inclusion probabilities unavailable"
                          : first_view_error;
            report.metrics.push_back(std::move(m));
            continue;
        }
        std::vector<double> totals;
        totals.reserve(rows.size());
        double sum_v = 0.0;
        int covered = 0;
        for (const auto& row : rows) {
            const double v = row.totals[k];
            totals.push_back(v);
            sum_v += v;
            if (row.truncated[k]) ++m.truncated_count;
            if (v >= 0.0) {
                if (std::fabs(row.estimate - y_true) <= u * std::sqrt(v)) ++covered;
            } else {
                ++m.negative_count;
            }
        }
        m.mean_vhat = sum_v / double(sc.replicates);
        m.rb_pct = relative_bias_pct(totals, v_ref);
        m.rs_pct = relative_stability_pct(totals, v_ref);
        m.coverage = double(covered) / double(sc.replicates);
        report.metrics.push_back(std::move(m));
    }
    return report;
}

GridResult run_grid(const McGrid& grid) {
    if (grid.icc.empty() || grid.n_psu_sample.empty() || grid.n_ssu_sample.empty())
        throw std::invalid_argument("run_grid: empty grid axis");
    if (grid.base.fixed_population && grid.icc.size() > 1)
        throw std::invalid_argument("run_grid: icc axis requires the synthetic population");

    GridResult out;
    std::uint64_t cell = 0;
    for (double icc : grid.icc) {
        for (int n_psu : grid.n_psu_sample) {
            for (int n_ssu : grid.n_ssu_sample) {
                McScenario sc = grid.base;
                sc.population.icc = icc;
                // shared population structure across every cell of the grid
                sc.population.seed = derive_seed(grid.base.master_seed, 0, kTagPopulation);
                sc.n_psu_sample = n_psu;
                sc.n_ssu_sample = n_ssu;
                sc.master_seed = derive_seed(grid.base.master_seed, cell, kTagCell);
                out.reports.push_back(run_study(sc));
                ++cell;
            }
        }
    }
    if (grid.bands) out.violations = check_bands(out.reports, *grid.bands);
    return out;
}

std::vector<std::string> check_bands(const std::vector<McReport>& reports, const McBands& bands) {
    std::vector<std::string> violations;
    auto cell_name = [](const McReport& r) {
        std::ostringstream os;
        os << "icc=" << r.icc << " n_I=" << r.n_psu_sample << " n_i=" << r.n_ssu_sample;
        return os.str();
    };
    auto check = [&](const McReport& r, const EstimatorMetrics& m, const char* what, double value,
                     const std::map<VarKind, Band>& spec) {
        const auto it = spec.find(m.kind);
        if (it == spec.end()) return;
        if (std::isnan(value) || value < it->second.lo || value > it->second.hi) {
            std::ostringstream os;
            os << cell_name(r) << " " << var_kind_name(m.kind) << " " << what << "=" << value
               << " outside [" << it->second.lo << ", " << it->second.hi << "]";
            violations.push_back(os.str());
        }
    };
    for (const auto& r : reports)
        for (const auto& m : r.metrics) {
            if (!m.available) continue;
            check(r, m, "rb", m.rb_pct, bands.rb);
            check(r, m, "rs", m.rs_pct, bands.rs);
            check(r, m, "coverage", m.coverage, bands.coverage);
        }
    return violations;
}

namespace {

std::string format_double(const char* fmt, double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

}  // namespace

std::string emit_table_csv(const std::vector<McReport>& reports) {
    std::ostringstream os;
    if (reports.empty())
        return "icc,n_I,n_i,rb_haj_a,rb_haj,rs_haj_a,rs_haj,ci_haj_a,ci_haj\n";
    os << "icc,n_I,n_i";
    for (const auto& m : reports.front().metrics) os << ",rb_" << var_kind_name(m.kind);
    for (const auto& m : reports.front().metrics) os << ",rs_" << var_kind_name(m.kind);
    for (const auto& m : reports.front().metrics) os << ",ci_" << var_kind_name(m.kind);
    os << "\n";
    for (const auto& r : reports) {
        os << format_double("%.6g", r.icc) << ',' << r.n_psu_sample << ',' << r.n_ssu_sample;
        for (const auto& m : r.metrics) os << ',' << (m.available ? format_double("%.6f", m.rb_pct) : "");
        for (const auto& m : r.metrics) os << ',' << (m.available ? format_double("%.6f", m.rs_pct) : "");
        for (const auto& m : r.metrics) os << ',' << (m.available ? format_double("%.6f", m.coverage) : "");
        os << "\n";
    }
    return os.str();
}

std::string emit_table_text(const std::vector<McReport>& reports) {
    std::ostringstream os;
    char buf[256];
    std::vector<std::string> names;
    if (!reports.empty())
        for (const auto& m : reports.front().metrics) names.push_back(var_kind_name(m.kind));
    else
        names = {"haj_a", "haj"};

    os << "ICC   n_I   n_i  |";
    for (const char* group : {"RB%", "RS%", "CI"})
        for (const auto& n : names) {
            std::snprintf(buf, sizeof buf, " %10s", (std::string(group) + "[" + n + "]").c_str());
            os << buf;
        }
    os << "\n";
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-5.3g %-5d %-4d |", r.icc, r.n_psu_sample, r.n_ssu_sample);
        os << buf;
        auto row = [&](auto getter, const char* fmt) {
            for (const auto& m : r.metrics) {
                if (!m.available) {
                    std::snprintf(buf, sizeof buf, " %10s", "-");
                } else {
                    std::snprintf(buf, sizeof buf, fmt, getter(m));
                }
                os << buf;
            }
        };
        row([](const EstimatorMetrics& m) { return m.rb_pct; }, " %10.2f");
        row([](const EstimatorMetrics& m) { return m.rs_pct; }, " %10.2f");
        row([](const EstimatorMetrics& m) { return m.coverage; }, " %10.2f");
        os << "\n";
    }
    return os.str();
}

}  // namespace twostage
