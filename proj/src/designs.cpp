#include "twostage/designs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace twostage {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double l) { return 1.0 / (1.0 + std::exp(-l)); }

std::uint64_t select_threshold(double p) {
    // P(select) = round(p * 2^53) / 2^53 against (u64 >> 11)
    if (p <= 0.0) return 0;
    if (p >= 1.0) return std::uint64_t(1) << 53;
    return std::uint64_t(std::llround(p * 9007199254740992.0));
}

void validate_probs(const std::vector<double>& probs, bool allow_one, const char* what) {
    if (probs.empty()) throw std::invalid_argument(std::string(what) + ": probs must be non-empty");
    for (double p : probs) {
        if (!(p > 0.0) || p > 1.0 || (!allow_one && p == 1.0))
            throw std::invalid_argument(std::string(what) + ": probabilities must lie in (0,1" +
                                        (allow_one ? "]" : ")"));
    }
}

void validate_fixed_size_sum(const std::vector<double>& probs, int n, const char* what) {
    const double s = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::fabs(s - double(n)) > 1e-9)
        throw std::invalid_argument(std::string(what) + ": probabilities must sum to n (got " +
                                    std::to_string(s) + " for n=" + std::to_string(n) + ")");
}

// Visits every size-k subset of {0,...,m-1}.
template <typename Fn>
void for_each_combination(int m, int k, Fn&& fn) {
    if (k < 0 || k > m) return;
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        fn(static_cast<const std::vector<int>&>(idx));
        int j = k - 1;
        while (j >= 0 && idx[std::size_t(j)] == m - k + j) --j;
        if (j < 0) break;
        ++idx[std::size_t(j)];
        for (int t = j + 1; t < k; ++t) idx[std::size_t(t)] = idx[std::size_t(t - 1)] + 1;
    }
}

}  // namespace

const char* design_kind_name(DesignKind k) {
    switch (k) {
        case DesignKind::srswor: return "srswor";
        case DesignKind::poisson: return "poisson";
        case DesignKind::rejective: return "rejective";
        case DesignKind::sampford: return "sampford";
    }
    return "?";
}

DesignKind design_kind_from_name(const std::string& name) {
    if (name == "srswor") return DesignKind::srswor;
    if (name == "poisson") return DesignKind::poisson;
    if (name == "rejective") return DesignKind::rejective;
    if (name == "sampford") return DesignKind::sampford;
    throw std::invalid_argument("unknown design kind '" + name + "'");
}

std::vector<double> enumerated_first_order(const EnumeratedDesign& d) {
    std::vector<double> pi(std::size_t(d.universe), 0.0);
    for (std::size_t s = 0; s < d.samples.size(); ++s)
        for (int i : d.samples[s]) pi[std::size_t(i)] += d.probs[s];
    return pi;
}

double InclusionTable::pi3(int i, int j, int k) const {
    std::array<int, 3> key{i, j, k};
    std::sort(key.begin(), key.end());
    if (key[0] == key[1] || key[1] == key[2])
        throw std::invalid_argument("pi3: indices must be distinct");
    if (!third.empty() || has_third) {
        auto it = third.find(key);
        if (it != third.end()) return it->second;
        if (has_third) return 0.0;
    }
    if (third_uniform) return *third_uniform;
    throw std::logic_error("pi3: order-3 probabilities not available");
}

double InclusionTable::pi4(int i, int j, int k, int l) const {
    std::array<int, 4> key{i, j, k, l};
    std::sort(key.begin(), key.end());
    for (int t = 0; t < 3; ++t)
        if (key[std::size_t(t)] == key[std::size_t(t + 1)])
            throw std::invalid_argument("pi4: indices must be distinct");
    if (!fourth.empty() || has_fourth) {
        auto it = fourth.find(key);
        if (it != fourth.end()) return it->second;
        if (has_fourth) return 0.0;
    }
    if (fourth_uniform) return *fourth_uniform;
    throw std::logic_error("pi4: order-4 probabilities not available");
}

// ---------------------------------------------------------------------------
// InclusionView

InclusionView InclusionView::srswor(int population, int sample) {
    if (sample < 1 || sample > population)
        throw std::invalid_argument("InclusionView::srswor: need 1 <= n <= N");
    InclusionView v;
    v.kind_ = Kind::srswor;
    v.size_ = population;
    v.n_ = sample;
    v.fixed_ = true;
    return v;
}

InclusionView InclusionView::independent(std::vector<double> pi) {
    InclusionView v;
    v.kind_ = Kind::independent;
    v.size_ = int(pi.size());
    v.pi_ = std::move(pi);
    v.fixed_ = false;
    return v;
}

InclusionView InclusionView::table(std::shared_ptr<const InclusionTable> t, bool fixed_size) {
    InclusionView v;
    v.kind_ = Kind::table;
    v.size_ = t->size();
    v.table_ = std::move(t);
    v.fixed_ = fixed_size;
    return v;
}

InclusionView InclusionView::stratified(std::vector<std::pair<std::vector<int>, InclusionView>> parts) {
    InclusionView v;
    v.kind_ = Kind::stratified;
    int total = 0;
    for (const auto& [units, part] : parts) total += int(units.size());
    v.size_ = total;
    v.stratum_of_.assign(std::size_t(total), -1);
    v.local_of_.assign(std::size_t(total), -1);
    v.fixed_ = true;
    for (std::size_t s = 0; s < parts.size(); ++s) {
        const auto& units = parts[s].first;
        if (int(units.size()) != parts[s].second.size())
            throw std::invalid_argument("InclusionView::stratified: stratum size mismatch");
        if (!parts[s].second.fixed_size()) v.fixed_ = false;
        for (std::size_t l = 0; l < units.size(); ++l) {
            const int g = units[l];
            if (g < 0 || g >= total || v.stratum_of_[std::size_t(g)] != -1)
                throw std::invalid_argument("InclusionView::stratified: units must partition the range");
            v.stratum_of_[std::size_t(g)] = int(s);
            v.local_of_[std::size_t(g)] = int(l);
        }
        v.parts_.push_back(std::move(parts[s].second));
    }
    return v;
}

double InclusionView::pi(int i) const {
    switch (kind_) {
        case Kind::srswor: return double(n_) / double(size_);
        case Kind::independent: return pi_[std::size_t(i)];
        case Kind::table: return table_->pi(i);
        case Kind::stratified:
            return parts_[std::size_t(stratum_of_[std::size_t(i)])].pi(local_of_[std::size_t(i)]);
    }
    return 0.0;
}

std::optional<std::pair<int, int>> InclusionView::srswor_params() const {
    if (kind_ != Kind::srswor) return std::nullopt;
    return std::pair<int, int>{size_, n_};
}

double InclusionView::pi2(int i, int j) const {
    if (i == j) return pi(i);
    switch (kind_) {
        case Kind::srswor:
            return double(n_) * double(n_ - 1) / (double(size_) * double(size_ - 1));
        case Kind::independent: return pi_[std::size_t(i)] * pi_[std::size_t(j)];
        case Kind::table: return table_->pi2(i, j);
        case Kind::stratified: {
            const int si = stratum_of_[std::size_t(i)];
            const int sj = stratum_of_[std::size_t(j)];
            if (si != sj) return pi(i) * pi(j);
            return parts_[std::size_t(si)].pi2(local_of_[std::size_t(i)], local_of_[std::size_t(j)]);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Conditional Poisson machinery

std::vector<double> conditional_poisson_first_order(const std::vector<double>& working, int n) {
    const int m = int(working.size());
    if (n < 0 || n > m)
        throw std::invalid_argument("conditional_poisson_first_order: need 0 <= n <= N");
    validate_probs(working, false, "conditional_poisson_first_order");
    std::vector<double> pi(std::size_t(m), 0.0);
    if (n == 0) return pi;
    if (n == m) {
        std::fill(pi.begin(), pi.end(), 1.0);
        return pi;
    }

    // odds, scaled by their maximum (the recursion is scale invariant)
    std::vector<double> w(static_cast<std::size_t>(m));
    double wmax = 0.0;
    for (int i = 0; i < m; ++i) {
        w[std::size_t(i)] = working[std::size_t(i)] / (1.0 - working[std::size_t(i)]);
        wmax = std::max(wmax, w[std::size_t(i)]);
    }
    for (auto& x : w) x /= wmax;

    // pi_i(k) = k * w_i (1 - pi_i(k-1)) / sum_j w_j (1 - pi_j(k-1))
    std::vector<double> prev(std::size_t(m), 0.0);
    for (int k = 1; k <= n; ++k) {
        double denom = 0.0;
        for (int i = 0; i < m; ++i) denom += w[std::size_t(i)] * (1.0 - prev[std::size_t(i)]);
        for (int i = 0; i < m; ++i)
            pi[std::size_t(i)] = double(k) * w[std::size_t(i)] * (1.0 - prev[std::size_t(i)]) / denom;
        prev = pi;
    }
    for (auto& p : pi) p = std::clamp(p, 0.0, 1.0);
    return pi;
}

CalibrationResult calibrate_rejective(const std::vector<double>& target_pi, int n,
                                      double tol, int max_iter) {
    const int m = int(target_pi.size());
    if (n < 1 || n >= m)
        throw std::invalid_argument("calibrate_rejective: need 1 <= n < N");
    validate_probs(target_pi, false, "calibrate_rejective");
    validate_fixed_size_sum(target_pi, n, "calibrate_rejective");

    std::vector<double> l(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) l[std::size_t(i)] = logit(target_pi[std::size_t(i)]);

    std::vector<double> best_l = l;
    double best_resid = std::numeric_limits<double>::infinity();
    double step = 1.0;
    std::vector<double> p(static_cast<std::size_t>(m));

    for (int iter = 1; iter <= max_iter; ++iter) {
        for (int i = 0; i < m; ++i)
            p[std::size_t(i)] = expit(std::clamp(l[std::size_t(i)], -40.0, 40.0));
        const std::vector<double> pi_hat = conditional_poisson_first_order(p, n);
        double resid = 0.0;
        for (int i = 0; i < m; ++i)
            resid = std::max(resid, std::fabs(pi_hat[std::size_t(i)] - target_pi[std::size_t(i)]));

        if (resid < tol) return CalibrationResult{p, resid, iter};

        if (resid < best_resid) {
            best_resid = resid;
            best_l = l;
            step = std::min(1.0, step * 1.25);
        } else {
            step = std::max(0.05, step * 0.5);
            l = best_l;
            for (int i = 0; i < m; ++i)
                p[std::size_t(i)] = expit(std::clamp(l[std::size_t(i)], -40.0, 40.0));
            // recompute the direction from the best point
            const std::vector<double> pi_best = conditional_poisson_first_order(p, n);
            for (int i = 0; i < m; ++i)
                l[std::size_t(i)] += step * (logit(target_pi[std::size_t(i)]) -
                                             logit(std::clamp(pi_best[std::size_t(i)], 1e-12, 1.0 - 1e-12)));
            continue;
        }
        for (int i = 0; i < m; ++i)
            l[std::size_t(i)] += step * (logit(target_pi[std::size_t(i)]) -
                                         logit(std::clamp(pi_hat[std::size_t(i)], 1e-12, 1.0 - 1e-12)));
    }
    throw std::runtime_error("calibrate_rejective: no convergence after " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(best_resid) + ")");
}

std::vector<double> proportional_to_size_pi(const std::vector<double>& sizes, int n) {
    const int m = int(sizes.size());
    if (n < 1 || n > m) throw std::invalid_argument("proportional_to_size_pi: need 1 <= n <= N");
    for (double s : sizes)
        if (!(s > 0.0)) throw std::invalid_argument("proportional_to_size_pi: sizes must be positive");

    std::vector<double> pi(std::size_t(m), 0.0);
    std::vector<bool> capped(std::size_t(m), false);
    int n_capped = 0;
    for (;;) {
        double total = 0.0;
        for (int i = 0; i < m; ++i)
            if (!capped[std::size_t(i)]) total += sizes[std::size_t(i)];
        const int remaining = n - n_capped;
        if (remaining == 0) break;
        bool changed = false;
        for (int i = 0; i < m; ++i) {
            if (capped[std::size_t(i)]) continue;
            const double p = double(remaining) * sizes[std::size_t(i)] / total;
            if (p >= 1.0) {
                capped[std::size_t(i)] = true;
                pi[std::size_t(i)] = 1.0;
                ++n_capped;
                changed = true;
            } else {
                pi[std::size_t(i)] = p;
            }
        }
        if (!changed) break;
    }
    return pi;
}

// ---------------------------------------------------------------------------
// Design

int Design::sample_size() const {
    if (kind_ == DesignKind::poisson)
        throw std::logic_error("sample_size: poisson designs have random size");
    return n_;
}

const std::vector<double>& Design::working_probs() const {
    if (kind_ != DesignKind::rejective && kind_ != DesignKind::poisson)
        throw std::logic_error("working_probs: only defined for rejective and poisson designs");
    return working_;
}

Design& Design::set_attempts_cap(long cap) {
    if (cap < 1) throw std::invalid_argument("set_attempts_cap: cap must be positive");
    attempts_cap_ = cap;
    return *this;
}

Design Design::srswor(int population, int sample) {
    if (population < 1 || sample < 1 || sample > population)
        throw std::invalid_argument("Design::srswor: need 1 <= n <= N");
    Design d;
    d.kind_ = DesignKind::srswor;
    d.N_ = population;
    d.n_ = sample;
    d.pi_.assign(std::size_t(population), double(sample) / double(population));
    return d;
}

Design Design::poisson(std::vector<double> probs) {
    validate_probs(probs, true, "Design::poisson");
    Design d;
    d.kind_ = DesignKind::poisson;
    d.N_ = int(probs.size());
    d.n_ = -1;
    d.pi_ = probs;
    d.working_ = std::move(probs);
    d.build_thresholds();
    return d;
}

Design Design::rejective(const std::vector<double>& target_pi, int n) {
    validate_probs(target_pi, true, "Design::rejective");
    validate_fixed_size_sum(target_pi, n, "Design::rejective");
    Design d;
    d.kind_ = DesignKind::rejective;
    d.N_ = int(target_pi.size());
    d.n_ = n;
    d.pi_.assign(std::size_t(d.N_), 1.0);
    d.working_.assign(std::size_t(d.N_), 1.0);

    std::vector<double> rest;
    for (int i = 0; i < d.N_; ++i) {
        if (target_pi[std::size_t(i)] == 1.0) d.forced_.push_back(i);
        else { d.random_.push_back(i); rest.push_back(target_pi[std::size_t(i)]); }
    }
    const int m = n - int(d.forced_.size());
    if (m < 0 || m > int(d.random_.size()))
        throw std::invalid_argument("Design::rejective: take-all units exceed the sample size");
    if (m > 0) {
        if (m == int(d.random_.size())) {
            // degenerate: everything is selected
            for (std::size_t k = 0; k < d.random_.size(); ++k)
                d.working_[std::size_t(d.random_[k])] = rest[k];
        } else {
            const CalibrationResult cal = calibrate_rejective(rest, m);
            const std::vector<double> exact = conditional_poisson_first_order(cal.working, m);
            for (std::size_t k = 0; k < d.random_.size(); ++k) {
                d.working_[std::size_t(d.random_[k])] = cal.working[k];
                d.pi_[std::size_t(d.random_[k])] = exact[k];
            }
        }
    }
    d.build_thresholds();
    return d;
}

Design Design::rejective_with_working(const std::vector<double>& working, int n) {
    validate_probs(working, true, "Design::rejective_with_working");
    Design d;
    d.kind_ = DesignKind::rejective;
    d.N_ = int(working.size());
    d.n_ = n;
    d.pi_.assign(std::size_t(d.N_), 1.0);
    d.working_ = working;

    std::vector<double> rest;
    for (int i = 0; i < d.N_; ++i) {
        if (working[std::size_t(i)] == 1.0) d.forced_.push_back(i);
        else { d.random_.push_back(i); rest.push_back(working[std::size_t(i)]); }
    }
    const int m = n - int(d.forced_.size());
    if (m < 0 || m > int(d.random_.size()))
        throw std::invalid_argument("Design::rejective_with_working: infeasible size");
    if (m > 0 && m < int(d.random_.size())) {
        const std::vector<double> exact = conditional_poisson_first_order(rest, m);
        for (std::size_t k = 0; k < d.random_.size(); ++k)
            d.pi_[std::size_t(d.random_[k])] = exact[k];
    } else if (m == 0) {
        for (int i : d.random_) d.pi_[std::size_t(i)] = 0.0;
    }
    d.build_thresholds();
    return d;
}

Design Design::sampford(const std::vector<double>& target_pi, int n) {
    validate_probs(target_pi, true, "Design::sampford");
    validate_fixed_size_sum(target_pi, n, "Design::sampford");
    Design d;
    d.kind_ = DesignKind::sampford;
    d.N_ = int(target_pi.size());
    d.n_ = n;
    d.pi_ = target_pi;
    for (int i = 0; i < d.N_; ++i) {
        if (target_pi[std::size_t(i)] == 1.0) d.forced_.push_back(i);
        else d.random_.push_back(i);
    }
    const int m = n - int(d.forced_.size());
    if (m < 0 || m > int(d.random_.size()))
        throw std::invalid_argument("Design::sampford: take-all units exceed the sample size");
    d.build_sampford_tables();
    return d;
}

Design Design::from_spec(const DesignSpec& spec) {
    switch (spec.kind) {
        case DesignKind::srswor:
            if (!spec.probs.empty())
                throw std::invalid_argument("DesignSpec: srswor takes no probabilities");
            return srswor(spec.population, spec.n);
        case DesignKind::poisson: return poisson(spec.probs);
        case DesignKind::rejective: return rejective(spec.probs, spec.n);
        case DesignKind::sampford: return sampford(spec.probs, spec.n);
    }
    throw std::invalid_argument("DesignSpec: unknown kind");
}

void Design::build_thresholds() {
    thresholds_.clear();
    if (kind_ == DesignKind::poisson) {
        thresholds_.reserve(std::size_t(N_));
        for (int i = 0; i < N_; ++i) thresholds_.push_back(select_threshold(working_[std::size_t(i)]));
    } else if (kind_ == DesignKind::rejective) {
        thresholds_.reserve(random_.size());
        for (int i : random_) thresholds_.push_back(select_threshold(working_[std::size_t(i)]));
    }
}

void Design::build_sampford_tables() {
    const int m = n_ - int(forced_.size());
    if (m <= 0) return;
    sampford_first_cum_.clear();
    sampford_rest_cum_.clear();
    double acc1 = 0.0, acc2 = 0.0;
    for (int i : random_) {
        const double p = pi_[std::size_t(i)];
        acc1 += p;
        acc2 += p / (1.0 - p);
        sampford_first_cum_.push_back(acc1);
        sampford_rest_cum_.push_back(acc2);
    }
    for (auto& v : sampford_first_cum_) v /= acc1;
    for (auto& v : sampford_rest_cum_) v /= acc2;
    sampford_first_cum_.back() = 1.0;
    sampford_rest_cum_.back() = 1.0;
}

namespace {

int pick_from_cumulative(const std::vector<double>& cum, RngStream& rng) {
    const double u = rng.next_double();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return int(it - cum.begin());
}

}  // namespace

std::vector<int> Design::draw(RngStream& rng) const {
    std::vector<int> out;
    switch (kind_) {
        case DesignKind::srswor: {
            thread_local std::vector<int> scratch;
            scratch.resize(std::size_t(N_));
            std::iota(scratch.begin(), scratch.end(), 0);
            for (int t = 0; t < n_; ++t) {
                const int j = t + int(rng.next_below(std::uint64_t(N_ - t)));
                std::swap(scratch[std::size_t(t)], scratch[std::size_t(j)]);
            }
            out.assign(scratch.begin(), scratch.begin() + n_);
            break;
        }
        case DesignKind::poisson: {
            for (int i = 0; i < N_; ++i)
                if ((rng.next_u64() >> 11) < thresholds_[std::size_t(i)]) out.push_back(i);
            return out;  // already sorted
        }
        case DesignKind::rejective: {
            const int m = n_ - int(forced_.size());
            const int M = int(random_.size());
            if (m == M) {
                out = random_;
            } else if (m > 0) {
                bool accepted = false;
                for (long attempt = 0; attempt < attempts_cap_; ++attempt) {
                    out.clear();
                    bool failed = false;
                    for (int j = 0; j < M; ++j) {
                        if (int(out.size()) + (M - j) < m) { failed = true; break; }
                        if ((rng.next_u64() >> 11) < thresholds_[std::size_t(j)]) {
                            if (int(out.size()) == m) { failed = true; break; }
                            out.push_back(random_[std::size_t(j)]);
                        }
                    }
                    if (!failed && int(out.size()) == m) { accepted = true; break; }
                }
                if (!accepted)
                    throw std::runtime_error("rejective draw: acceptance loop exceeded " +
                                             std::to_string(attempts_cap_) + " attempts");
            }
            out.insert(out.end(), forced_.begin(), forced_.end());
            break;
        }
        case DesignKind::sampford: {
            const int m = n_ - int(forced_.size());
            if (m > 0) {
                bool accepted = false;
                for (long attempt = 0; attempt < attempts_cap_; ++attempt) {
                    out.clear();
                    out.push_back(random_[std::size_t(pick_from_cumulative(sampford_first_cum_, rng))]);
                    bool dup = false;
                    for (int t = 1; t < m && !dup; ++t) {
                        const int u = random_[std::size_t(pick_from_cumulative(sampford_rest_cum_, rng))];
                        for (int v : out)
                            if (v == u) { dup = true; break; }
                        if (!dup) out.push_back(u);
                    }
                    if (!dup) { accepted = true; break; }
                }
                if (!accepted)
                    throw std::runtime_error("sampford draw: acceptance loop exceeded " +
                                             std::to_string(attempts_cap_) + " attempts");
            }
            out.insert(out.end(), forced_.begin(), forced_.end());
            break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

EnumeratedDesign Design::enumerate(int limit) const {
    EnumeratedDesign e;
    e.universe = N_;

    if (kind_ == DesignKind::poisson) {
        if (N_ > kPoissonEnumerationLimit)
            throw std::invalid_argument("enumerate: poisson designs are limited to " +
                                        std::to_string(kPoissonEnumerationLimit) + " units");
        const std::uint64_t count = std::uint64_t(1) << N_;
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            double p = 1.0;
            std::vector<int> s;
            for (int i = 0; i < N_; ++i) {
                const double q = working_[std::size_t(i)];
                if (mask & (std::uint64_t(1) << i)) { p *= q; s.push_back(i); }
                else p *= 1.0 - q;
            }
            if (p > 0.0) {
                e.samples.push_back(std::move(s));
                e.probs.push_back(p);
            }
        }
        return e;
    }

    if (N_ > limit)
        throw std::invalid_argument("enumerate: population size " + std::to_string(N_) +
                                    " exceeds the enumeration limit " + std::to_string(limit) +
                                    "; use Monte Carlo checks instead");

    if (kind_ == DesignKind::srswor) {
        for_each_combination(N_, n_, [&](const std::vector<int>& idx) {
            e.samples.push_back(idx);
            e.probs.push_back(1.0);
        });
    } else {
        const int m = n_ - int(forced_.size());
        std::vector<double> weight(random_.size());
        for (std::size_t k = 0; k < random_.size(); ++k) {
            const double p = (kind_ == DesignKind::rejective) ? working_[std::size_t(random_[k])]
                                                              : pi_[std::size_t(random_[k])];
            weight[k] = p / (1.0 - p);
        }
        for_each_combination(int(random_.size()), m, [&](const std::vector<int>& idx) {
            double w = 1.0;
            double lam = 0.0;  // sampford factor: sum of (1 - pi) over the sample
            std::vector<int> s(forced_);
            for (int k : idx) {
                w *= weight[std::size_t(k)];
                lam += 1.0 - pi_[std::size_t(random_[std::size_t(k)])];
                s.push_back(random_[std::size_t(k)]);
            }
            std::sort(s.begin(), s.end());
            e.samples.push_back(std::move(s));
            e.probs.push_back(kind_ == DesignKind::sampford ? lam * w : w);
        });
    }

    double total = std::accumulate(e.probs.begin(), e.probs.end(), 0.0);
    for (auto& p : e.probs) p /= total;
    return e;
}

InclusionTable srswor_inclusion_table(int population, int sample, int max_order) {
    if (population < 1 || sample < 1 || sample > population)
        throw std::invalid_argument("srswor_inclusion_table: need 1 <= n <= N");
    if (population > 4096)
        throw std::invalid_argument("srswor_inclusion_table: dense table capped at 4096 units");
    const double N = population, n = sample;
    InclusionTable t;
    t.first.assign(std::size_t(population), n / N);
    const double p2 = (population == 1) ? 1.0 : n * (n - 1.0) / (N * (N - 1.0));
    t.joint.assign(std::size_t(population) * std::size_t(population), p2);
    for (int i = 0; i < population; ++i)
        t.joint[std::size_t(i) * std::size_t(population) + std::size_t(i)] = n / N;
    if (max_order >= 3)
        t.third_uniform = (sample < 3 || population < 3)
                              ? 0.0
                              : p2 * (n - 2.0) / (N - 2.0);
    if (max_order >= 4)
        t.fourth_uniform = (sample < 4 || population < 4)
                               ? 0.0
                               : p2 * (n - 2.0) * (n - 3.0) / ((N - 2.0) * (N - 3.0));
    return t;
}

InclusionTable Design::inclusion_table(int max_order, int limit) const {
    if (max_order < 2 || max_order > 4)
        throw std::invalid_argument("inclusion_table: max_order must be 2, 3 or 4");
    if (kind_ == DesignKind::srswor) return srswor_inclusion_table(N_, n_, max_order);

    const EnumeratedDesign e = enumerate(limit);
    InclusionTable t;
    t.first.assign(std::size_t(N_), 0.0);
    t.joint.assign(std::size_t(N_) * std::size_t(N_), 0.0);
    t.has_third = max_order >= 3;
    t.has_fourth = max_order >= 4;

    if (max_order >= 3) {
        // guard against pathological costs
        double cost = 0.0;
        for (const auto& s : e.samples) {
            const double k = double(s.size());
            cost += k * (k - 1.0) * (k - 2.0) / 6.0;
        }
        if (cost > 5e7)
            throw std::invalid_argument("inclusion_table: higher-order enumeration too large");
    }

    for (std::size_t s = 0; s < e.samples.size(); ++s) {
        const auto& idx = e.samples[s];
        const double p = e.probs[s];
        const int k = int(idx.size());
        for (int a = 0; a < k; ++a) {
            t.first[std::size_t(idx[std::size_t(a)])] += p;
            for (int b = a + 1; b < k; ++b) {
                t.joint[std::size_t(idx[std::size_t(a)]) * std::size_t(N_) + std::size_t(idx[std::size_t(b)])] += p;
                t.joint[std::size_t(idx[std::size_t(b)]) * std::size_t(N_) + std::size_t(idx[std::size_t(a)])] += p;
            }
        }
        if (max_order >= 3) {
            for (int a = 0; a < k; ++a)
                for (int b = a + 1; b < k; ++b)
                    for (int c = b + 1; c < k; ++c)
                        t.third[{idx[std::size_t(a)], idx[std::size_t(b)], idx[std::size_t(c)]}] += p;
        }
        if (max_order >= 4) {
            for (int a = 0; a < k; ++a)
                for (int b = a + 1; b < k; ++b)
                    for (int c = b + 1; c < k; ++c)
                        for (int d2 = c + 1; d2 < k; ++d2)
                            t.fourth[{idx[std::size_t(a)], idx[std::size_t(b)], idx[std::size_t(c)],
                                      idx[std::size_t(d2)]}] += p;
        }
    }
    for (int i = 0; i < N_; ++i)
        t.joint[std::size_t(i) * std::size_t(N_) + std::size_t(i)] = t.first[std::size_t(i)];
    return t;
}

InclusionView Design::view(int limit) const {
    switch (kind_) {
        case DesignKind::srswor: return InclusionView::srswor(N_, n_);
        case DesignKind::poisson: return InclusionView::independent(pi_);
        default:
            return InclusionView::table(std::make_shared<InclusionTable>(inclusion_table(2, limit)), true);
    }
}

}  // namespace twostage
