#include "twostage/population.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "twostage/rng.hpp"

namespace twostage {

double Psu::total() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

long long Population::unit_count() const {
    long long n = 0;
    for (const auto& p : psus) n += p.size();
    return n;
}

Population build_population(const std::vector<std::vector<double>>& psu_values) {
    if (psu_values.empty())
        throw std::invalid_argument("build_population: at least one PSU is required");
    Population pop;
    pop.psus.reserve(psu_values.size());
    for (std::size_t i = 0; i < psu_values.size(); ++i) {
        if (psu_values[i].empty())
            throw std::invalid_argument("build_population: PSU " + std::to_string(i) + " is empty");
        pop.psus.push_back(Psu{psu_values[i]});
    }
    return pop;
}

Population generate_sim_population(const SimPopConfig& cfg) {
    if (cfg.psu_count < 1)
        throw std::invalid_argument("generate_sim_population: psu_count must be >= 1");
    if (cfg.mean_psu_size < 1.0)
        throw std::invalid_argument("generate_sim_population: mean_psu_size must be >= 1");
    if (cfg.size_cv < 0.0)
        throw std::invalid_argument("generate_sim_population: size_cv must be >= 0");
    if (!(cfg.icc > 0.0 && cfg.icc < 1.0))
        throw std::invalid_argument("generate_sim_population: icc must lie in (0,1)");
    if (cfg.sigma < 0.0)
        throw std::invalid_argument("generate_sim_population: sigma must be >= 0");

    // Independent substreams so that the size structure and the unit effects
    // do not depend on icc: the same seed yields the same PSU layout for
    // every variable generated on it.
    RngStream size_rng(derive_seed(cfg.seed, 0, kTagPsuSizes));
    RngStream psu_rng(derive_seed(cfg.seed, 0, kTagPsuEffect));
    RngStream ssu_rng(derive_seed(cfg.seed, 0, kTagSsuNoise));

    std::vector<int> sizes(std::size_t(cfg.psu_count));
    if (cfg.size_cv == 0.0) {
        const int s = std::max(2, int(std::llround(cfg.mean_psu_size)));
        for (auto& v : sizes) v = s;
    } else {
        const double shape = 1.0 / (cfg.size_cv * cfg.size_cv);
        const double scale = cfg.mean_psu_size * cfg.size_cv * cfg.size_cv;
        for (auto& v : sizes) {
            const double draw = size_rng.next_gamma(shape, scale);
            v = std::max(2, int(std::llround(draw)));
        }
    }

    const double within_sd = cfg.sigma * std::sqrt((1.0 - cfg.icc) / cfg.icc);

    Population pop;
    pop.psus.resize(std::size_t(cfg.psu_count));
    for (int i = 0; i < cfg.psu_count; ++i) {
        const double effect = cfg.sigma * psu_rng.next_normal();
        auto& vals = pop.psus[std::size_t(i)].values;
        vals.resize(std::size_t(sizes[std::size_t(i)]));
        for (auto& y : vals) y = cfg.mean_level + effect + within_sd * ssu_rng.next_normal();
    }
    return pop;
}

double population_total(const Population& pop) {
    double s = 0.0;
    for (const auto& p : pop.psus) s += p.total();
    return s;
}

void write_population_csv(const Population& pop, std::ostream& out) {
    out << "psu_id,ssu_id,y\n";
    char buf[64];
    for (int i = 0; i < pop.psu_count(); ++i) {
        const auto& vals = pop.psu(i).values;
        for (std::size_t k = 0; k < vals.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", vals[k]);
            out << i << ',' << k << ',' << buf << '\n';
        }
    }
}

Population read_population_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("population csv: empty file");
    // tolerate a UTF-8 BOM and trailing CR
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "psu_id,ssu_id,y")
        throw std::invalid_argument("population csv: expected header 'psu_id,ssu_id,y'");

    std::vector<std::vector<double>> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw std::invalid_argument("population csv: malformed row " + std::to_string(row));
        const long psu = std::stol(a);
        const long ssu = std::stol(b);
        const double y = std::stod(c);
        if (psu < 0 || psu > long(values.size()))
            throw std::invalid_argument("population csv: psu_id out of order at row " + std::to_string(row));
        if (psu == long(values.size())) values.emplace_back();
        if (ssu != long(values[std::size_t(psu)].size()))
            throw std::invalid_argument("population csv: ssu_id out of order at row " + std::to_string(row));
        values[std::size_t(psu)].push_back(y);
    }
    return build_population(values);
}

}  // namespace twostage
