#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace twostage {

// One primary sampling unit: the values of its secondary units.
struct Psu {
    std::vector<double> values;

    int size() const { return int(values.size()); }
    double total() const;
};

// Finite population partitioned into PSUs. Immutable after construction and
// safe to share across threads.
struct Population {
    std::vector<Psu> psus;

    int psu_count() const { return int(psus.size()); }
    long long unit_count() const;
    const Psu& psu(int i) const { return psus[std::size_t(i)]; }
};

// Configuration of the synthetic PSU/SSU population generator. Values follow
//   y = mean_level + sigma * b_i + sigma * sqrt((1-icc)/icc) * e_k
// with b_i a per-PSU standard normal effect and e_k unit-level noise, so the
// intra-cluster correlation of y equals icc.
struct SimPopConfig {
    int psu_count = 0;
    double mean_psu_size = 0.0;   // mean of the drawn PSU sizes
    double size_cv = 0.0;         // coefficient of variation of the PSU sizes
    double mean_level = 20.0;
    double sigma = 2.0;
    double icc = 0.0;             // in (0,1)
    std::uint64_t seed = 0;
};

// Builds a population from explicit per-PSU value lists. Rejects empty input
// and empty PSUs.
Population build_population(const std::vector<std::vector<double>>& psu_values);

// Generates a synthetic population. PSU sizes are gamma draws with the
// requested mean and cv, rounded to the nearest integer and clamped to >= 2
// (all equal to round(mean) when cv == 0). Bit-identical for a fixed seed.
Population generate_sim_population(const SimPopConfig& cfg);

double population_total(const Population& pop);

// Flat CSV with header "psu_id,ssu_id,y"; ids are 0-based and rows are in
// population order.
void write_population_csv(const Population& pop, std::ostream& out);
Population read_population_csv(std::istream& in);

}  // namespace twostage
