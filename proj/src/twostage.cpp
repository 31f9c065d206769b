#include "twostage/twostage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace twostage {

bool TwoStageDesign::first_fixed_size() const {
    if (!stratified()) return first && first->fixed_size();
    for (const auto& s : strata)
        if (!s.design.fixed_size()) return false;
    return true;
}

int TwoStageDesign::first_sample_size() const {
    if (!stratified()) {
        if (!first) throw std::logic_error("TwoStageDesign: missing first-stage design");
        return first->sample_size();
    }
    int n = 0;
    for (const auto& s : strata) n += s.design.sample_size();
    return n;
}

std::vector<double> TwoStageDesign::first_order() const {
    std::vector<double> pi(std::size_t(psu_count()), 0.0);
    if (!stratified()) {
        if (!first) throw std::logic_error("TwoStageDesign: missing first-stage design");
        return first->first_order();
    }
    for (const auto& s : strata) {
        const auto& local = s.design.first_order();
        for (std::size_t k = 0; k < s.psus.size(); ++k)
            pi[std::size_t(s.psus[k])] = local[k];
    }
    return pi;
}

InclusionView TwoStageDesign::first_view(int limit) const {
    if (!stratified()) {
        if (!first) throw std::logic_error("TwoStageDesign: missing first-stage design");
        return first->view(limit);
    }
    std::vector<std::pair<std::vector<int>, InclusionView>> parts;
    parts.reserve(strata.size());
    for (const auto& s : strata) parts.emplace_back(s.psus, s.design.view(limit));
    return InclusionView::stratified(std::move(parts));
}

void TwoStageDesign::validate(const Population& pop) const {
    const int n_psu = pop.psu_count();
    if (psu_count() != n_psu)
        throw std::invalid_argument("TwoStageDesign: second-stage designs (" +
                                    std::to_string(psu_count()) + ") do not match the population (" +
                                    std::to_string(n_psu) + " PSUs)");
    for (int i = 0; i < n_psu; ++i)
        if (second[std::size_t(i)].population_size() != pop.psu(i).size())
            throw std::invalid_argument("TwoStageDesign: second-stage design of PSU " +
                                        std::to_string(i) + " does not match its size");
    if (!stratified()) {
        if (!first) throw std::invalid_argument("TwoStageDesign: missing first-stage design");
        if (first->population_size() != n_psu)
            throw std::invalid_argument("TwoStageDesign: first-stage design does not match the PSU count");
    } else {
        std::vector<bool> seen(std::size_t(n_psu), false);
        for (const auto& s : strata) {
            if (s.design.population_size() != int(s.psus.size()))
                throw std::invalid_argument("TwoStageDesign: stratum design size mismatch");
            for (int g : s.psus) {
                if (g < 0 || g >= n_psu || seen[std::size_t(g)])
                    throw std::invalid_argument("TwoStageDesign: strata must partition the PSUs");
                seen[std::size_t(g)] = true;
            }
        }
        for (bool b : seen)
            if (!b) throw std::invalid_argument("TwoStageDesign: strata must cover every PSU");
    }
}

TwoStageSample draw_two_stage(const Population& pop, const TwoStageDesign& design, RngStream& rng) {
    design.validate(pop);

    TwoStageSample s;
    if (!design.stratified()) {
        s.psus = design.first->draw(rng);
        const auto& pi = design.first->first_order();
        s.first_pi.reserve(s.psus.size());
        for (int i : s.psus) s.first_pi.push_back(pi[std::size_t(i)]);
    } else {
        std::vector<std::pair<int, double>> picked;
        for (const auto& st : design.strata) {
            const auto local = st.design.draw(rng);
            const auto& pi = st.design.first_order();
            for (int l : local) picked.emplace_back(st.psus[std::size_t(l)], pi[std::size_t(l)]);
        }
        std::sort(picked.begin(), picked.end());
        s.psus.reserve(picked.size());
        s.first_pi.reserve(picked.size());
        for (const auto& [g, p] : picked) {
            s.psus.push_back(g);
            s.first_pi.push_back(p);
        }
    }

    s.ssus.reserve(s.psus.size());
    s.second_pi.reserve(s.psus.size());
    for (int i : s.psus) {
        const Design& d2 = design.second[std::size_t(i)];
        auto units = d2.draw(rng);
        const auto& pi2 = d2.first_order();
        std::vector<double> probs;
        probs.reserve(units.size());
        for (int k : units) probs.push_back(pi2[std::size_t(k)]);
        s.ssus.push_back(std::move(units));
        s.second_pi.push_back(std::move(probs));
    }
    return s;
}

double psu_ht(const TwoStageSample& sample, const Population& pop, int sel) {
    const auto& values = pop.psu(sample.psus[std::size_t(sel)]).values;
    const auto& units = sample.ssus[std::size_t(sel)];
    const auto& probs = sample.second_pi[std::size_t(sel)];
    double t = 0.0;
    for (std::size_t k = 0; k < units.size(); ++k)
        t += values[std::size_t(units[k])] / probs[k];
    return t;
}

double ht_estimate(const TwoStageSample& sample, const Population& pop) {
    double total = 0.0;
    for (std::size_t j = 0; j < sample.psus.size(); ++j)
        total += psu_ht(sample, pop, int(j)) / sample.first_pi[j];
    return total;
}

double within_psu_variance(const Psu& psu, const Design& design) {
    if (design.population_size() != psu.size())
        throw std::invalid_argument("within_psu_variance: design does not match the PSU size");
    const int N = psu.size();

    if (design.kind() == DesignKind::srswor) {
        const int n = design.sample_size();
        if (n == N) return 0.0;
        double mean = 0.0;
        for (double y : psu.values) mean += y;
        mean /= double(N);
        double ss = 0.0;
        for (double y : psu.values) ss += (y - mean) * (y - mean);
        const double s2 = ss / double(N - 1);
        return double(N) * double(N) * (1.0 / double(n) - 1.0 / double(N)) * s2;
    }

    InclusionTable t;
    try {
        t = design.inclusion_table(2);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument(
            "within_psu_variance: second-stage design is neither srswor nor enumerable");
    }
    double v = 0.0;
    for (int k = 0; k < N; ++k) {
        const double pk = t.pi(k);
        const double zk = psu.values[std::size_t(k)] / pk;
        v += pk * (1.0 - pk) * zk * zk;
        for (int l = k + 1; l < N; ++l) {
            const double pl = t.pi(l);
            const double zl = psu.values[std::size_t(l)] / pl;
            v += 2.0 * (t.pi2(k, l) - pk * pl) * zk * zl;
        }
    }
    return v;
}

namespace {

// First-stage component for one design over the given sub-totals.
double first_stage_variance(const Design& design, const std::vector<double>& totals) {
    const int N = design.population_size();
    const auto& pi = design.first_order();

    if (design.kind() == DesignKind::srswor) {
        const int n = design.sample_size();
        if (n == N || N == 1) return 0.0;
        double mean = 0.0;
        for (double y : totals) mean += y;
        mean /= double(N);
        double ss = 0.0;
        for (double y : totals) ss += (y - mean) * (y - mean);
        const double s2 = ss / double(N - 1);
        return double(N) * double(N) * (1.0 / double(n) - 1.0 / double(N)) * s2;
    }
    if (design.kind() == DesignKind::poisson) {
        double v = 0.0;
        for (int i = 0; i < N; ++i)
            v += (1.0 - pi[std::size_t(i)]) * totals[std::size_t(i)] * totals[std::size_t(i)] / pi[std::size_t(i)];
        return v;
    }

    InclusionTable t;
    try {
        t = design.inclusion_table(2);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument(
            "exact_variance: first stage is neither srswor nor enumerable; "
            "use the Monte Carlo reference variance instead");
    }
    double v = 0.0;
    for (int i = 0; i < N; ++i) {
        const double zi = totals[std::size_t(i)] / pi[std::size_t(i)];
        v += pi[std::size_t(i)] * (1.0 - pi[std::size_t(i)]) * zi * zi;
        for (int j = i + 1; j < N; ++j) {
            const double zj = totals[std::size_t(j)] / pi[std::size_t(j)];
            v += 2.0 * (t.pi2(i, j) - pi[std::size_t(i)] * pi[std::size_t(j)]) * zi * zj;
        }
    }
    return v;
}

}  // namespace

VarianceDecomposition exact_variance(const Population& pop, const TwoStageDesign& design) {
    design.validate(pop);
    const int n_psu = pop.psu_count();

    std::vector<double> vi(static_cast<std::size_t>(n_psu));
    for (int i = 0; i < n_psu; ++i)
        vi[std::size_t(i)] = within_psu_variance(pop.psu(i), design.second[std::size_t(i)]);

    const std::vector<double> pi = design.first_order();
    VarianceDecomposition d;
    for (int i = 0; i < n_psu; ++i) {
        d.v2 += (1.0 - pi[std::size_t(i)]) / pi[std::size_t(i)] * vi[std::size_t(i)];
        d.v3 += vi[std::size_t(i)];
    }

    std::vector<double> totals(static_cast<std::size_t>(n_psu));
    for (int i = 0; i < n_psu; ++i) totals[std::size_t(i)] = pop.psu(i).total();

    if (!design.stratified()) {
        d.v1 = first_stage_variance(*design.first, totals);
    } else {
        for (const auto& st : design.strata) {
            std::vector<double> sub;
            sub.reserve(st.psus.size());
            for (int g : st.psus) sub.push_back(totals[std::size_t(g)]);
            d.v1 += first_stage_variance(st.design, sub);
        }
    }
    return d;
}

EnumeratedDesign enumerate_first_stage(const TwoStageDesign& design, int limit) {
    if (!design.stratified()) {
        if (!design.first) throw std::invalid_argument("enumerate_first_stage: missing design");
        return design.first->enumerate(limit);
    }
    EnumeratedDesign acc;
    acc.universe = design.psu_count();
    acc.samples.push_back({});
    acc.probs.push_back(1.0);
    for (const auto& st : design.strata) {
        const EnumeratedDesign local = st.design.enumerate(limit);
        EnumeratedDesign next;
        next.universe = acc.universe;
        next.samples.reserve(acc.samples.size() * local.samples.size());
        for (std::size_t a = 0; a < acc.samples.size(); ++a) {
            for (std::size_t b = 0; b < local.samples.size(); ++b) {
                std::vector<int> s = acc.samples[a];
                for (int l : local.samples[b]) s.push_back(st.psus[std::size_t(l)]);
                std::sort(s.begin(), s.end());
                next.samples.push_back(std::move(s));
                next.probs.push_back(acc.probs[a] * local.probs[b]);
            }
        }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace twostage
