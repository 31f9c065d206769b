#include "twostage/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twostage {

namespace {

double expected_sample_size(const Design& d) {
    if (d.fixed_size()) return double(d.sample_size());
    double s = 0.0;
    for (double p : d.first_order()) s += p;
    return s;
}

struct PairStats {
    double dependence = 0.0;  // max |pi_kl - pi_k pi_l|
    double min_joint = std::numeric_limits<double>::infinity();
    double max_joint = 0.0;
    bool any_pair = false;
    bool available = true;
};

// Pairwise statistics of one design; absent when it would need an
// enumeration beyond the limit.
PairStats pair_stats(const Design& d, const InclusionTable* table) {
    PairStats st;
    const int N = d.population_size();
    if (N < 2) return st;
    st.any_pair = true;

    if (table != nullptr) {
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) {
                const double pij = table->pi2(i, j);
                st.dependence = std::max(st.dependence,
                                         std::fabs(pij - table->pi(i) * table->pi(j)));
                st.min_joint = std::min(st.min_joint, pij);
                st.max_joint = std::max(st.max_joint, pij);
            }
        return st;
    }

    switch (d.kind()) {
        case DesignKind::srswor: {
            const double n = d.sample_size(), Nd = N;
            const double pij = n * (n - 1.0) / (Nd * (Nd - 1.0));
            const double pi = n / Nd;
            st.dependence = std::fabs(pij - pi * pi);
            st.min_joint = st.max_joint = pij;
            return st;
        }
        case DesignKind::poisson: {
            const auto& pi = d.first_order();
            std::vector<double> sorted(pi);
            std::sort(sorted.begin(), sorted.end());
            st.dependence = 0.0;
            st.min_joint = sorted[0] * sorted[1];
            st.max_joint = sorted[std::size_t(N - 1)] * sorted[std::size_t(N - 2)];
            return st;
        }
        default: {
            if (N > Design::kDefaultEnumerationLimit) {
                st.available = false;
                return st;
            }
            const InclusionTable t = d.inclusion_table(2);
            return pair_stats(d, &t);
        }
    }
}

}  // namespace

AssumptionReport check_assumptions(const Population& pop, const TwoStageDesign& design,
                                   const InclusionTable* first_table,
                                   std::optional<double> v1) {
    design.validate(pop);
    AssumptionReport r;

    const int n_psu = pop.psu_count();
    const std::vector<double> first_pi = design.first_order();
    double n_first = 0.0;
    if (!design.stratified()) {
        n_first = expected_sample_size(*design.first);
    } else {
        for (const auto& st : design.strata) n_first += expected_sample_size(st.design);
    }
    r.first_fraction = n_first / double(n_psu);
    r.first_fraction_ok = r.first_fraction < 1.0;

    r.first_pi_ratio_min = std::numeric_limits<double>::infinity();
    for (double p : first_pi) {
        const double ratio = double(n_psu) * p / n_first;
        r.first_pi_ratio_min = std::min(r.first_pi_ratio_min, ratio);
        r.first_pi_ratio_max = std::max(r.first_pi_ratio_max, ratio);
    }

    // first-stage pairwise statistics
    {
        PairStats st;
        st.available = false;
        if (first_table != nullptr) {
            st = PairStats{};
            const int N = first_table->size();
            st.any_pair = N >= 2;
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j) {
                    const double pij = first_table->pi2(i, j);
                    st.dependence = std::max(st.dependence,
                                             std::fabs(pij - first_table->pi(i) * first_table->pi(j)));
                    st.min_joint = std::min(st.min_joint, pij);
                    st.max_joint = std::max(st.max_joint, pij);
                }
        } else if (!design.stratified()) {
            st = pair_stats(*design.first, nullptr);
        }
        if (st.available && st.any_pair) {
            r.first_pair_dependence = st.dependence;
            const double scale = double(n_psu) * double(n_psu) / (n_first * n_first);
            r.first_pair_ratio_min = st.min_joint * scale;
            r.first_pair_ratio_max = st.max_joint * scale;
            r.joint_positive = st.min_joint > 0.0;
        }

        // order-4 dependence where available
        if (first_table != nullptr && (first_table->has_fourth || first_table->fourth_uniform)) {
            double dep = 0.0;
            const int N = first_table->size();
            if (first_table->fourth_uniform && first_table->fourth.empty()) {
                // uniform closed form: any quadruple has the same probability
                if (N >= 4) {
                    const double p4 = *first_table->fourth_uniform;
                    const double p = first_table->pi(0);
                    dep = std::fabs(p4 - p * p * p * p);
                }
            } else {
                for (const auto& [key, p4] : first_table->fourth) {
                    const double prod = first_table->pi(key[0]) * first_table->pi(key[1]) *
                                        first_table->pi(key[2]) * first_table->pi(key[3]);
                    dep = std::max(dep, std::fabs(p4 - prod));
                }
                // quadruples outside the map have probability zero
                double max_prod = 0.0;
                if (N >= 4) {
                    std::vector<double> pi_sorted(first_table->first);
                    std::sort(pi_sorted.begin(), pi_sorted.end(), std::greater<>());
                    max_prod = pi_sorted[0] * pi_sorted[1] * pi_sorted[2] * pi_sorted[3];
                    if (std::size_t(first_table->fourth.size()) <
                        std::size_t(N) * std::size_t(N - 1) * std::size_t(N - 2) * std::size_t(N - 3) / 24)
                        dep = std::max(dep, max_prod);
                }
            }
            r.first_quad_dependence = dep;
        } else if (!design.stratified() && design.first->kind() == DesignKind::srswor && n_psu >= 4) {
            const double n = design.first->sample_size(), N = n_psu;
            const double p = n / N;
            const double p4 = (n < 4) ? 0.0
                                      : p * (n - 1.0) / (N - 1.0) * (n - 2.0) / (N - 2.0) *
                                            (n - 3.0) / (N - 3.0);
            r.first_quad_dependence = std::fabs(p4 - p * p * p * p);
        }
    }

    // second stage
    {
        double sum_size = 0.0, sum_sample = 0.0;
        for (int i = 0; i < n_psu; ++i) {
            sum_size += double(pop.psu(i).size());
            sum_sample += expected_sample_size(design.second[std::size_t(i)]);
        }
        r.mean_psu_size = sum_size / double(n_psu);
        r.mean_ssu_sample = sum_sample / double(n_psu);

        r.size_ratio_min = r.sample_ratio_min = std::numeric_limits<double>::infinity();
        r.second_pi_ratio_min = std::numeric_limits<double>::infinity();
        double dep = 0.0;
        double min_joint = std::numeric_limits<double>::infinity(), max_joint = 0.0;
        bool pair_available = true, any_pair = false;

        for (int i = 0; i < n_psu; ++i) {
            const Design& d2 = design.second[std::size_t(i)];
            const double Ni = double(pop.psu(i).size());
            const double ni = expected_sample_size(d2);
            r.size_ratio_min = std::min(r.size_ratio_min, Ni / r.mean_psu_size);
            r.size_ratio_max = std::max(r.size_ratio_max, Ni / r.mean_psu_size);
            r.sample_ratio_min = std::min(r.sample_ratio_min, ni / r.mean_ssu_sample);
            r.sample_ratio_max = std::max(r.sample_ratio_max, ni / r.mean_ssu_sample);
            for (double p : d2.first_order()) {
                const double ratio = r.mean_psu_size * p / r.mean_ssu_sample;
                r.second_pi_ratio_min = std::min(r.second_pi_ratio_min, ratio);
                r.second_pi_ratio_max = std::max(r.second_pi_ratio_max, ratio);
            }
            const PairStats st = pair_stats(d2, nullptr);
            if (!st.available) pair_available = false;
            else if (st.any_pair) {
                any_pair = true;
                dep = std::max(dep, st.dependence);
                min_joint = std::min(min_joint, st.min_joint);
                max_joint = std::max(max_joint, st.max_joint);
            }
        }
        if (pair_available && any_pair) {
            r.second_pair_dependence = dep;
            const double scale =
                r.mean_psu_size * r.mean_psu_size / (r.mean_ssu_sample * r.mean_ssu_sample);
            r.second_pair_ratio_min = min_joint * scale;
            r.second_pair_ratio_max = max_joint * scale;
        }
    }

    // study variable
    {
        double sum = 0.0, sum4 = 0.0;
        long long n_units = 0;
        for (int i = 0; i < n_psu; ++i)
            for (double y : pop.psu(i).values) {
                sum += y;
                sum4 += y * y * y * y;
                ++n_units;
            }
        r.value_mean = sum / double(n_units);
        r.value_fourth_moment = sum4 / double(n_units);

        if (!v1) {
            try {
                v1 = exact_variance(pop, design).v1;
            } catch (const std::invalid_argument&) {
                // first stage not enumerable; leave absent
            }
        }
        if (v1) {
            const double N = double(pop.unit_count());
            r.normalized_first_variance = *v1 * n_first / (N * N);
        }
    }
    return r;
}

}  // namespace twostage
