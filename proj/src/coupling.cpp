#include "twostage/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace twostage {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Union support of two enumerated designs with aligned probabilities.
void align_supports(const EnumeratedDesign& p, const EnumeratedDesign& p_r,
                    std::vector<std::vector<int>>& samples, std::vector<double>& pp,
                    std::vector<double>& rr) {
    if (p.universe != p_r.universe)
        throw std::invalid_argument("coupling: designs live on different universes");
    std::map<std::vector<int>, std::pair<double, double>> merged;
    for (std::size_t s = 0; s < p.samples.size(); ++s) merged[p.samples[s]].first += p.probs[s];
    for (std::size_t s = 0; s < p_r.samples.size(); ++s) merged[p_r.samples[s]].second += p_r.probs[s];
    samples.clear();
    pp.clear();
    rr.clear();
    samples.reserve(merged.size());
    for (auto& [sample, pr] : merged) {
        samples.push_back(sample);
        pp.push_back(pr.first);
        rr.push_back(pr.second);
    }
}

DesignDistances distances_aligned(const std::vector<double>& pp, const std::vector<double>& rr) {
    DesignDistances d;
    d.chi2 = 0.0;
    d.kl = 0.0;
    double tv = 0.0;
    for (std::size_t s = 0; s < pp.size(); ++s) {
        tv += std::fabs(pp[s] - rr[s]);
        if (rr[s] > 0.0) {
            const double diff = pp[s] - rr[s];
            d.chi2 += diff * diff / rr[s];
            if (pp[s] > 0.0) d.kl += pp[s] * std::log(pp[s] / rr[s]);
        } else if (pp[s] > 0.0) {
            d.chi2 = kInf;
            d.kl = kInf;
        }
    }
    d.tv = 0.5 * tv;
    d.alpha = 1.0 - d.tv;
    return d;
}

std::vector<double> cumulative(const std::vector<double>& weights) {
    std::vector<double> cum(weights.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cum[i] = acc;
    }
    if (acc > 0.0) {
        for (auto& c : cum) c /= acc;
        cum.back() = 1.0;
    }
    return cum;
}

int pick(const std::vector<double>& cum, RngStream& rng) {
    const double u = rng.next_double();
    return int(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
}

}  // namespace

DesignDistances distances(const EnumeratedDesign& p, const EnumeratedDesign& p_r) {
    std::vector<std::vector<int>> samples;
    std::vector<double> pp, rr;
    align_supports(p, p_r, samples, pp, rr);
    return distances_aligned(pp, rr);
}

Coupling::Coupling(EnumeratedDesign p, EnumeratedDesign p_r) {
    align_supports(p, p_r, samples_, p_, r_);
    dist_ = distances_aligned(p_, r_);

    pi_p_.assign(std::size_t(p.universe), 0.0);
    pi_r_.assign(std::size_t(p.universe), 0.0);
    for (std::size_t s = 0; s < samples_.size(); ++s)
        for (int i : samples_[s]) {
            pi_p_[std::size_t(i)] += p_[s];
            pi_r_[std::size_t(i)] += r_[s];
        }

    std::vector<double> shared(samples_.size()), p_only(samples_.size()), r_only(samples_.size());
    for (std::size_t s = 0; s < samples_.size(); ++s) {
        shared[s] = std::min(p_[s], r_[s]);
        p_only[s] = std::max(p_[s] - r_[s], 0.0);
        r_only[s] = std::max(r_[s] - p_[s], 0.0);
    }
    shared_cum_ = cumulative(shared);
    p_only_cum_ = cumulative(p_only);
    r_only_cum_ = cumulative(r_only);
}

namespace {

TwoStageSample make_sample(const std::vector<int>& first, const std::vector<double>& pi,
                           const std::vector<Design>& second, const Population& pop,
                           RngStream& rng) {
    TwoStageSample s;
    s.psus = first;
    s.first_pi.reserve(first.size());
    for (int i : first) s.first_pi.push_back(pi[std::size_t(i)]);
    for (int i : first) {
        const Design& d2 = second[std::size_t(i)];
        if (d2.population_size() != pop.psu(i).size())
            throw std::invalid_argument("coupling: second-stage design does not match PSU size");
        auto units = d2.draw(rng);
        const auto& p2 = d2.first_order();
        std::vector<double> probs;
        probs.reserve(units.size());
        for (int k : units) probs.push_back(p2[std::size_t(k)]);
        s.ssus.push_back(std::move(units));
        s.second_pi.push_back(std::move(probs));
    }
    return s;
}

}  // namespace

CoupledPair Coupling::draw(const std::vector<Design>& second, const Population& pop,
                           RngStream& rng) const {
    if (int(second.size()) != pop.psu_count())
        throw std::invalid_argument("coupling: one second-stage design per PSU is required");

    CoupledPair pair;
    const double u = rng.next_double();
    if (dist_.alpha > 0.0 && u <= dist_.alpha) {
        const auto& first = samples_[std::size_t(pick(shared_cum_, rng))];
        pair.shared = true;
        pair.sample_p = make_sample(first, pi_p_, second, pop, rng);
        // identical second-stage samples, re-weighted by the other design's pi
        pair.sample_r = pair.sample_p;
        pair.sample_r.first_pi.clear();
        for (int i : first) pair.sample_r.first_pi.push_back(pi_r_[std::size_t(i)]);
    } else {
        pair.shared = false;
        const auto& first_p = samples_[std::size_t(pick(p_only_cum_, rng))];
        pair.sample_p = make_sample(first_p, pi_p_, second, pop, rng);
        const auto& first_r = samples_[std::size_t(pick(r_only_cum_, rng))];
        pair.sample_r = make_sample(first_r, pi_r_, second, pop, rng);
    }
    return pair;
}

CoupledPair coupled_draw(const EnumeratedDesign& p, const EnumeratedDesign& p_r,
                         const std::vector<Design>& second, const Population& pop,
                         RngStream& rng) {
    return Coupling(p, p_r).draw(second, pop, rng);
}

GapResult coupling_gap(const EnumeratedDesign& p, const EnumeratedDesign& p_r,
                       const std::vector<Design>& second, const Population& pop,
                       int replicates, RngStream& rng) {
    if (replicates < 1) throw std::invalid_argument("coupling_gap: replicates must be >= 1");
    const Coupling coupling(p, p_r);

    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < replicates; ++t) {
        const CoupledPair pair = coupling.draw(second, pop, rng);
        const double gap = ht_estimate(pair.sample_p, pop) - ht_estimate(pair.sample_r, pop);
        sum += gap * gap;
        sum_sq += gap * gap * gap * gap;
    }
    GapResult out;
    out.empirical = sum / double(replicates);
    const double var = std::max(0.0, sum_sq / double(replicates) - out.empirical * out.empirical);
    out.mc_se = std::sqrt(var / double(replicates));

    // enumerated bound, with pi taken from the reference design
    const double y_total = population_total(pop);
    std::vector<double> vi(std::size_t(pop.psu_count()));
    for (int i = 0; i < pop.psu_count(); ++i)
        vi[std::size_t(i)] = within_psu_variance(pop.psu(i), second[std::size_t(i)]);

    std::vector<std::vector<int>> samples;
    std::vector<double> pp, rr;
    align_supports(p, p_r, samples, pp, rr);
    const auto& pi = coupling.pi_r();
    double bound = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        double expanded = 0.0, vsum = 0.0;
        for (int i : samples[s]) {
            expanded += pop.psu(i).total() / pi[std::size_t(i)];
            vsum += vi[std::size_t(i)] / (pi[std::size_t(i)] * pi[std::size_t(i)]);
        }
        bound += std::fabs(pp[s] - rr[s]) *
                 ((expanded - y_total) * (expanded - y_total) + vsum);
    }
    out.bound = bound;
    return out;
}

}  // namespace twostage
