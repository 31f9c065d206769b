#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "twostage/rng.hpp"

namespace twostage {

enum class DesignKind { srswor, poisson, rejective, sampford };

const char* design_kind_name(DesignKind k);
DesignKind design_kind_from_name(const std::string& name);

// User-facing description of a single-stage design. `probs` holds the target
// first-order inclusion probabilities (per-unit selection probabilities for
// poisson); it is empty for srswor, where n/N is implied and `population`
// gives N.
struct DesignSpec {
    DesignKind kind = DesignKind::srswor;
    int n = 0;  // fixed sample size; ignored for poisson
    std::vector<double> probs;
    int population = 0;  // srswor only
};

// Complete support of a design: every sample with positive probability.
struct EnumeratedDesign {
    int universe = 0;
    std::vector<std::vector<int>> samples;  // sorted index sets
    std::vector<double> probs;
};

// First-order inclusion probabilities implied by an enumerated design.
std::vector<double> enumerated_first_order(const EnumeratedDesign& d);

// First- and second-order (optionally third/fourth) inclusion probabilities.
struct InclusionTable {
    std::vector<double> first;
    std::vector<double> joint;  // dense size x size, row-major; diagonal = first
    bool has_third = false;
    bool has_fourth = false;
    std::map<std::array<int, 3>, double> third;    // sorted index triples
    std::map<std::array<int, 4>, double> fourth;   // sorted index quadruples
    std::optional<double> third_uniform;   // closed-form designs (srswor)
    std::optional<double> fourth_uniform;

    int size() const { return int(first.size()); }
    double pi(int i) const { return first[std::size_t(i)]; }
    double pi2(int i, int j) const {
        return joint[std::size_t(i) * first.size() + std::size_t(j)];
    }
    double pi3(int i, int j, int k) const;
    double pi4(int i, int j, int k, int l) const;
};

// Lightweight accessor answering pi / pi2 queries for one design without
// materializing a table when a closed form exists.
class InclusionView {
public:
    static InclusionView srswor(int population, int sample);
    static InclusionView independent(std::vector<double> pi);
    static InclusionView table(std::shared_ptr<const InclusionTable> t, bool fixed_size);
    // Blocks sampled independently of each other; pi2 factorizes across blocks.
    static InclusionView stratified(std::vector<std::pair<std::vector<int>, InclusionView>> parts);

    int size() const { return size_; }
    bool fixed_size() const { return fixed_; }
    double pi(int i) const;
    double pi2(int i, int j) const;
    // (N, n) when this view is a plain srswor design
    std::optional<std::pair<int, int>> srswor_params() const;

private:
    enum class Kind { srswor, independent, table, stratified };
    Kind kind_ = Kind::srswor;
    int size_ = 0;
    bool fixed_ = true;
    int n_ = 0;
    std::vector<double> pi_;
    std::shared_ptr<const InclusionTable> table_;
    std::vector<InclusionView> parts_;
    std::vector<int> stratum_of_, local_of_;
};

struct CalibrationResult {
    std::vector<double> working;
    double residual = 0.0;
    int iterations = 0;
};

// Exact first-order inclusion probabilities of the size-n conditional Poisson
// design with the given Poisson working probabilities (all in (0,1)).
// Recursive over the sample size; O(N*n).
std::vector<double> conditional_poisson_first_order(const std::vector<double>& working, int n);

// Finds Poisson working probabilities whose size-n conditional design attains
// the requested first-order inclusion probabilities. Damped fixed point on
// logits; throws after max_iter iterations with the final residual.
CalibrationResult calibrate_rejective(const std::vector<double>& target_pi, int n,
                                      double tol = 1e-8, int max_iter = 1000);

// Probabilities proportional to size for a fixed-size-n design, with iterative
// capping at 1 and redistribution over the remaining units.
std::vector<double> proportional_to_size_pi(const std::vector<double>& sizes, int n);

// A compiled, immutable single-stage design. draw() takes a caller-owned
// stream; concurrent draws on distinct streams are safe.
class Design {
public:
    static constexpr int kDefaultEnumerationLimit = 22;
    static constexpr int kPoissonEnumerationLimit = 20;

    static Design srswor(int population, int sample);
    static Design census(int population) { return srswor(population, population); }
    static Design poisson(std::vector<double> probs);
    static Design rejective(const std::vector<double>& target_pi, int n);
    // Bypasses calibration; the working probabilities are taken as given and
    // the stored first-order probabilities are computed from them.
    static Design rejective_with_working(const std::vector<double>& working, int n);
    static Design sampford(const std::vector<double>& target_pi, int n);
    static Design from_spec(const DesignSpec& spec);

    DesignKind kind() const { return kind_; }
    int population_size() const { return N_; }
    bool fixed_size() const { return kind_ != DesignKind::poisson; }
    int sample_size() const;  // throws for poisson
    const std::vector<double>& first_order() const { return pi_; }
    const std::vector<double>& working_probs() const;  // rejective / poisson

    // Acceptance-loop caps for rejective and sampford draws.
    Design& set_attempts_cap(long cap);

    std::vector<int> draw(RngStream& rng) const;
    EnumeratedDesign enumerate(int limit = kDefaultEnumerationLimit) const;
    InclusionTable inclusion_table(int max_order = 2, int limit = kDefaultEnumerationLimit) const;
    InclusionView view(int limit = kDefaultEnumerationLimit) const;

private:
    Design() = default;
    void build_thresholds();
    void build_sampford_tables();

    DesignKind kind_ = DesignKind::srswor;
    int N_ = 0;
    int n_ = 0;
    std::vector<double> pi_;        // exact first-order probabilities
    std::vector<double> working_;   // poisson probs / rejective working probs (full length)
    std::vector<int> forced_;       // take-all units (pi == 1), rejective/sampford
    std::vector<int> random_;       // remaining units
    std::vector<std::uint64_t> thresholds_;  // per random_ unit, 2^53 scale
    std::vector<double> sampford_first_cum_;
    std::vector<double> sampford_rest_cum_;
    long attempts_cap_ = 1000000;
};

InclusionTable srswor_inclusion_table(int population, int sample, int max_order = 2);

// One-shot draw from a design description. Compiles the design first (for
// rejective specs this includes calibration); keep a Design around instead
// when drawing repeatedly.
inline std::vector<int> draw(const DesignSpec& spec, RngStream& rng) {
    return Design::from_spec(spec).draw(rng);
}

}  // namespace twostage
