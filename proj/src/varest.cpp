#include "twostage/varest.hpp"

#include <cmath>
#include <stdexcept>

#include "twostage/stats.hpp"

namespace twostage {

const char* var_kind_name(VarKind k) {
    switch (k) {
        case VarKind::ht: return "ht";
        case VarKind::yg: return "yg";
        case VarKind::haj: return "haj";
        case VarKind::ht_a: return "ht_a";
        case VarKind::yg_a: return "yg_a";
        case VarKind::haj_a: return "haj_a";
    }
    return "?";
}

VarKind var_kind_from_name(const std::string& name) {
    if (name == "ht") return VarKind::ht;
    if (name == "yg") return VarKind::yg;
    if (name == "haj") return VarKind::haj;
    if (name == "ht_a") return VarKind::ht_a;
    if (name == "yg_a") return VarKind::yg_a;
    if (name == "haj_a") return VarKind::haj_a;
    throw std::invalid_argument("unknown variance estimator '" + name + "'");
}

bool var_kind_is_simplified(VarKind k) {
    return k == VarKind::ht_a || k == VarKind::yg_a || k == VarKind::haj_a;
}

namespace {

void check_alignment(const TwoStageSample& sample, std::span<const InclusionView> second) {
    if (second.size() != sample.psus.size())
        throw std::invalid_argument("variance estimator: second-stage views must align with the sample");
}

// Expanded sub-totals z_i = Yhat_i / pi_Ii for the selected PSUs.
std::vector<double> expanded_totals(const TwoStageSample& sample, const Population& pop) {
    std::vector<double> z(sample.psus.size());
    for (std::size_t j = 0; j < sample.psus.size(); ++j)
        z[j] = psu_ht(sample, pop, int(j)) / sample.first_pi[j];
    return z;
}

double require_joint(double pij, int unit_a, int unit_b, const char* where) {
    if (!(pij > 0.0))
        throw std::runtime_error(std::string(where) + ": joint inclusion probability of units " +
                                 std::to_string(unit_a) + " and " + std::to_string(unit_b) +
                                 " is zero");
    return pij;
}

// srswor within-PSU estimator, to which both the HT and the Yates-Grundy
// forms reduce algebraically: N^2 (1/n - 1/N) s^2 on the sampled values.
double vhat_within_srswor(const TwoStageSample& sample, const Population& pop, int sel,
                          int population, int n) {
    if (n == population) return 0.0;
    const auto& units = sample.ssus[std::size_t(sel)];
    const auto& values = pop.psu(sample.psus[std::size_t(sel)]).values;
    if (units.size() < 2)
        throw std::invalid_argument(
            "within-PSU variance estimator: a single sampled unit cannot estimate it");
    double mean = 0.0;
    for (int k : units) mean += values[std::size_t(k)];
    mean /= double(units.size());
    double ss = 0.0;
    for (int k : units) {
        const double d = values[std::size_t(k)] - mean;
        ss += d * d;
    }
    const double s2 = ss / double(units.size() - 1);
    const double N = double(population);
    return N * N * (1.0 / double(n) - 1.0 / N) * s2;
}

// Within-PSU HT variance estimator for the PSU at sample position sel.
double vhat_within_ht(const TwoStageSample& sample, const Population& pop, int sel,
                      const InclusionView& view) {
    if (const auto srs = view.srswor_params())
        return vhat_within_srswor(sample, pop, sel, srs->first, srs->second);
    const auto& units = sample.ssus[std::size_t(sel)];
    const auto& probs = sample.second_pi[std::size_t(sel)];
    const auto& values = pop.psu(sample.psus[std::size_t(sel)]).values;
    double v = 0.0;
    for (std::size_t a = 0; a < units.size(); ++a) {
        const double pk = probs[a];
        const double zk = values[std::size_t(units[a])] / pk;
        v += (1.0 - pk) * zk * zk;
        for (std::size_t b = a + 1; b < units.size(); ++b) {
            const double pl = probs[b];
            const double zl = values[std::size_t(units[b])] / pl;
            const double pkl = require_joint(view.pi2(units[a], units[b]), units[a], units[b],
                                             "within-PSU variance estimator");
            v += 2.0 * (pkl - pk * pl) / pkl * zk * zl;
        }
    }
    return v;
}

// Within-PSU Yates-Grundy variance estimator.
double vhat_within_yg(const TwoStageSample& sample, const Population& pop, int sel,
                      const InclusionView& view) {
    if (!view.fixed_size())
        throw std::invalid_argument("Yates-Grundy estimator requires fixed-size second stages");
    if (const auto srs = view.srswor_params())
        return vhat_within_srswor(sample, pop, sel, srs->first, srs->second);
    const auto& units = sample.ssus[std::size_t(sel)];
    const auto& probs = sample.second_pi[std::size_t(sel)];
    const auto& values = pop.psu(sample.psus[std::size_t(sel)]).values;
    double v = 0.0;
    for (std::size_t a = 0; a < units.size(); ++a) {
        const double zk = values[std::size_t(units[a])] / probs[a];
        for (std::size_t b = a + 1; b < units.size(); ++b) {
            const double zl = values[std::size_t(units[b])] / probs[b];
            const double pkl = require_joint(view.pi2(units[a], units[b]), units[a], units[b],
                                             "within-PSU variance estimator");
            const double delta = pkl - probs[a] * probs[b];
            v += -(delta / pkl) * (zk - zl) * (zk - zl);
        }
    }
    return v;
}

double b_term(const TwoStageSample& sample, const Population& pop,
              std::span<const InclusionView> second, bool yg) {
    double b = 0.0;
    for (std::size_t j = 0; j < sample.psus.size(); ++j) {
        const double vi = yg ? vhat_within_yg(sample, pop, int(j), second[j])
                             : vhat_within_ht(sample, pop, int(j), second[j]);
        b += vi / sample.first_pi[j];
    }
    return b;
}

}  // namespace

VarEstimate vhat_ht(const TwoStageSample& sample, const Population& pop,
                    const InclusionView& first, std::span<const InclusionView> second) {
    check_alignment(sample, second);
    const std::vector<double> z = expanded_totals(sample, pop);

    VarEstimate est;
    est.kind = VarKind::ht;
    for (std::size_t a = 0; a < sample.psus.size(); ++a) {
        const double pi = sample.first_pi[a];
        est.a_term += (1.0 - pi) * z[a] * z[a];
        for (std::size_t b = a + 1; b < sample.psus.size(); ++b) {
            const double pij = require_joint(first.pi2(sample.psus[a], sample.psus[b]),
                                             sample.psus[a], sample.psus[b], "vhat_ht");
            const double delta = pij - pi * sample.first_pi[b];
            est.a_term += 2.0 * delta / pij * z[a] * z[b];
        }
    }
    est.b_term = b_term(sample, pop, second, false);
    est.total = est.a_term + est.b_term;
    return est;
}

VarEstimate vhat_yg(const TwoStageSample& sample, const Population& pop,
                    const InclusionView& first, std::span<const InclusionView> second) {
    check_alignment(sample, second);
    if (!first.fixed_size())
        throw std::invalid_argument("vhat_yg: the first-stage design must be of fixed size");
    const std::vector<double> z = expanded_totals(sample, pop);

    VarEstimate est;
    est.kind = VarKind::yg;
    for (std::size_t a = 0; a < sample.psus.size(); ++a) {
        for (std::size_t b = a + 1; b < sample.psus.size(); ++b) {
            const double pij = require_joint(first.pi2(sample.psus[a], sample.psus[b]),
                                             sample.psus[a], sample.psus[b], "vhat_yg");
            const double delta = pij - sample.first_pi[a] * sample.first_pi[b];
            est.a_term += -(delta / pij) * (z[a] - z[b]) * (z[a] - z[b]);
        }
    }
    est.b_term = b_term(sample, pop, second, true);
    est.total = est.a_term + est.b_term;
    return est;
}

VarEstimate vhat_hajek(const TwoStageSample& sample, const Population& pop,
                       std::span<const InclusionView> second, double trunc_coeff,
                       bool yg_within) {
    check_alignment(sample, second);
    if (trunc_coeff < 0.0)
        throw std::invalid_argument("vhat_hajek: trunc_coeff must be >= 0");
    const std::vector<double> z = expanded_totals(sample, pop);

    VarEstimate est;
    est.kind = VarKind::haj;
    const std::size_t n = sample.psus.size();
    double d_hat = 0.0;
    for (double pi : sample.first_pi) d_hat += 1.0 - pi;

    if (n >= 2 && d_hat >= trunc_coeff * double(n) && d_hat > 0.0) {
        double r = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) r += (1.0 - sample.first_pi[j]) * z[j];
        r /= d_hat;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double w = 1.0 - sample.first_pi[j];
            est.a_term += w * (z[j] - r) * (z[j] - r);
        }
        // finite-sample factor of the classical estimator; without it the
        // estimated center costs one degree of freedom and biases the term
        // by a factor close to (n-1)/n
        est.a_term *= double(n) / double(n - 1);
    } else {
        est.truncated = true;
    }
    est.b_term = b_term(sample, pop, second, yg_within);
    est.total = est.a_term + est.b_term;
    return est;
}

VarEstimate simplified(const VarEstimate& est) {
    VarEstimate s = est;
    s.b_term = 0.0;
    s.total = s.a_term;
    switch (est.kind) {
        case VarKind::ht: s.kind = VarKind::ht_a; break;
        case VarKind::yg: s.kind = VarKind::yg_a; break;
        case VarKind::haj: s.kind = VarKind::haj_a; break;
        default: break;  // already simplified
    }
    return s;
}

CiResult confidence_interval(double estimate, double variance, double alpha) {
    if (variance < 0.0)
        throw std::invalid_argument("confidence_interval: variance must be non-negative");
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("confidence_interval: alpha must lie in (0, 0.5)");
    const double half = normal_quantile(1.0 - alpha) * std::sqrt(variance);
    return CiResult{estimate - half, estimate + half, alpha, estimate};
}

StratifiedProportion stratified_proportion(const TwoStageSample& sample, const Population& pop,
                                           const std::vector<std::vector<int>>& strata,
                                           const std::function<double(int, int)>& indicator,
                                           double alpha) {
    if (sample.psus.empty())
        throw std::invalid_argument("stratified_proportion: empty sample");
    if (strata.empty())
        throw std::invalid_argument("stratified_proportion: at least one stratum is required");

    // stratum of each PSU
    std::vector<int> stratum_of(std::size_t(pop.psu_count()), -1);
    for (std::size_t h = 0; h < strata.size(); ++h)
        for (int g : strata[h]) {
            if (g < 0 || g >= pop.psu_count() || stratum_of[std::size_t(g)] != -1)
                throw std::invalid_argument("stratified_proportion: strata must partition the PSUs");
            stratum_of[std::size_t(g)] = int(h);
        }

    // second stages must be equal-probability within each selected PSU
    for (std::size_t j = 0; j < sample.psus.size(); ++j) {
        const auto& probs = sample.second_pi[j];
        for (double p : probs)
            if (std::fabs(p - probs.front()) > 1e-12)
                throw std::invalid_argument(
                    "stratified_proportion: second stages must use equal probabilities");
    }

    double n_hat = 0.0, y_hat = 0.0;
    for (std::size_t j = 0; j < sample.psus.size(); ++j) {
        const int g = sample.psus[j];
        const double pi = sample.first_pi[j];
        const auto& units = sample.ssus[j];
        const auto& probs = sample.second_pi[j];
        for (std::size_t t = 0; t < units.size(); ++t) {
            const double w = 1.0 / (pi * probs[t]);
            n_hat += w;
            y_hat += indicator(g, units[t]) * w;
        }
    }
    if (!(n_hat > 0.0))
        throw std::invalid_argument("stratified_proportion: estimated population size is zero");

    StratifiedProportion out;
    out.p_hat = y_hat / n_hat;
    out.outside_unit_interval = out.p_hat < 0.0 || out.p_hat > 1.0;

    // linearized variable e = (indicator - p_hat) / N_hat on the sampled units
    std::vector<double> e_ht(sample.psus.size(), 0.0);   // Ehat_i
    std::vector<double> s2_e(sample.psus.size(), 0.0);   // within-PSU sample variance of e
    for (std::size_t j = 0; j < sample.psus.size(); ++j) {
        const int g = sample.psus[j];
        const auto& units = sample.ssus[j];
        const auto& probs = sample.second_pi[j];
        double mean = 0.0;
        std::vector<double> e(units.size());
        for (std::size_t t = 0; t < units.size(); ++t) {
            e[t] = (indicator(g, units[t]) - out.p_hat) / n_hat;
            e_ht[j] += e[t] / probs[t];
            mean += e[t];
        }
        mean /= double(units.size());
        if (units.size() >= 2) {
            double ss = 0.0;
            for (double v : e) ss += (v - mean) * (v - mean);
            s2_e[j] = ss / double(units.size() - 1);
        }
    }

    // leading term with per-stratum centering, no truncation
    std::vector<double> d(strata.size(), 0.0), r(strata.size(), 0.0);
    std::vector<int> count(strata.size(), 0);
    for (std::size_t j = 0; j < sample.psus.size(); ++j) {
        const int h = stratum_of[std::size_t(sample.psus[j])];
        if (h < 0) throw std::invalid_argument("stratified_proportion: PSU outside all strata");
        const double w = 1.0 - sample.first_pi[j];
        d[std::size_t(h)] += w;
        r[std::size_t(h)] += w * e_ht[j] / sample.first_pi[j];
        ++count[std::size_t(h)];
    }
    for (std::size_t h = 0; h < strata.size(); ++h) {
        if (count[h] == 0)
            throw std::invalid_argument("stratified_proportion: stratum " + std::to_string(h) +
                                        " has no sampled PSU");
        r[h] = d[h] > 0.0 ? r[h] / d[h] : 0.0;
    }

    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < sample.psus.size(); ++j) {
        const int h = stratum_of[std::size_t(sample.psus[j])];
        const double pi = sample.first_pi[j];
        const double dev = e_ht[j] / pi - r[std::size_t(h)];
        a += (1.0 - pi) * dev * dev;

        const double n_i = double(sample.ssus[j].size());
        const double N_i = double(pop.psu(sample.psus[j]).size());
        const double factor = 1.0 / n_i - 1.0 / N_i;
        if (factor > 0.0) {
            if (sample.ssus[j].size() < 2)
                throw std::invalid_argument(
                    "stratified_proportion: a single sampled unit cannot estimate the within-PSU variance");
            b += N_i * N_i / pi * factor * s2_e[j];
        }
    }
    out.var_haj_a = a;
    out.var_haj = a + b;
    out.ci = confidence_interval(out.p_hat, out.var_haj, alpha);
    return out;
}

}  // namespace twostage
