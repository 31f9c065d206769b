#include "twostage/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace twostage {

using nlohmann::json;

SimPopConfig sim_pop_config_from_json(const json& j) {
    SimPopConfig cfg;
    cfg.psu_count = j.at("psu_count").get<int>();
    cfg.mean_psu_size = j.at("mean_psu_size").get<double>();
    cfg.size_cv = j.value("size_cv", 0.0);
    cfg.mean_level = j.value("mean_level", 20.0);
    cfg.sigma = j.value("sigma", 2.0);
    cfg.icc = j.at("icc").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

namespace {

std::vector<double> probs_from_json(const json& j, const std::vector<double>& sizes, int n) {
    const auto& p = j.at("probs");
    if (p.is_string()) {
        if (p.get<std::string>() != "proportional_to_size")
            throw std::invalid_argument("design: unknown probs keyword '" + p.get<std::string>() + "'");
        return proportional_to_size_pi(sizes, n);
    }
    auto probs = p.get<std::vector<double>>();
    if (probs.size() != sizes.size())
        throw std::invalid_argument("design: probs length does not match the unit count");
    return probs;
}

}  // namespace

Design design_from_json(const json& j, const std::vector<double>& sizes) {
    const DesignKind kind = design_kind_from_name(j.at("kind").get<std::string>());
    const int N = int(sizes.size());
    switch (kind) {
        case DesignKind::srswor: {
            const int n = j.at("n").get<int>();
            return Design::srswor(N, n);
        }
        case DesignKind::poisson: {
            if (j.contains("prob")) {
                const double p = j.at("prob").get<double>();
                return Design::poisson(std::vector<double>(std::size_t(N), p));
            }
            // poisson has no fixed size; allow "n" only alongside proportional probs
            const int n = j.value("n", 0);
            return Design::poisson(probs_from_json(j, sizes, n));
        }
        case DesignKind::rejective: {
            const int n = j.at("n").get<int>();
            return Design::rejective(probs_from_json(j, sizes, n), n);
        }
        case DesignKind::sampford: {
            const int n = j.at("n").get<int>();
            return Design::sampford(probs_from_json(j, sizes, n), n);
        }
    }
    throw std::invalid_argument("design: unknown kind");
}

Design second_stage_design_from_json(const json& j, int psu_size) {
    const DesignKind kind = design_kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
        case DesignKind::srswor: {
            const auto& n = j.at("n");
            if (n.is_string()) {
                if (n.get<std::string>() != "all")
                    throw std::invalid_argument("second stage: n must be an integer or \"all\"");
                return Design::census(psu_size);
            }
            return Design::srswor(psu_size, n.get<int>());
        }
        case DesignKind::poisson: {
            const double p = j.at("prob").get<double>();
            return Design::poisson(std::vector<double>(std::size_t(psu_size), p));
        }
        default:
            throw std::invalid_argument(
                "second stage: only srswor, census (n=\"all\") and uniform poisson are supported "
                "in configuration files");
    }
}

TwoStageDesign two_stage_design_from_json(const json& j, const Population& pop) {
    TwoStageDesign d;
    const int n_psu = pop.psu_count();
    std::vector<double> sizes(static_cast<std::size_t>(n_psu));
    for (int i = 0; i < n_psu; ++i) sizes[std::size_t(i)] = double(pop.psu(i).size());

    if (j.contains("strata")) {
        for (const auto& js : j.at("strata")) {
            StratumSpec st{js.at("psus").get<std::vector<int>>(), Design::srswor(1, 1)};
            std::vector<double> sub;
            sub.reserve(st.psus.size());
            for (int g : st.psus) {
                if (g < 0 || g >= n_psu)
                    throw std::invalid_argument("strata: PSU index out of range");
                sub.push_back(sizes[std::size_t(g)]);
            }
            st.design = design_from_json(js.at("first"), sub);
            d.strata.push_back(std::move(st));
        }
    } else {
        d.first = design_from_json(j.at("first"), sizes);
    }

    const auto& second = j.at("second");
    d.second.reserve(std::size_t(n_psu));
    for (int i = 0; i < n_psu; ++i)
        d.second.push_back(second_stage_design_from_json(second, pop.psu(i).size()));
    d.validate(pop);
    return d;
}

json sample_to_json(const TwoStageSample& s, const json& design_echo) {
    json j;
    j["design"] = design_echo;
    j["psus"] = s.psus;
    j["first_pi"] = s.first_pi;
    j["ssus"] = s.ssus;
    j["second_pi"] = s.second_pi;
    return j;
}

TwoStageSample sample_from_json(const json& j, json* design_echo) {
    TwoStageSample s;
    s.psus = j.at("psus").get<std::vector<int>>();
    s.first_pi = j.at("first_pi").get<std::vector<double>>();
    s.ssus = j.at("ssus").get<std::vector<std::vector<int>>>();
    s.second_pi = j.at("second_pi").get<std::vector<std::vector<double>>>();
    if (s.psus.size() != s.first_pi.size() || s.psus.size() != s.ssus.size() ||
        s.psus.size() != s.second_pi.size())
        throw std::invalid_argument("sample: mismatched field lengths");
    if (design_echo != nullptr && j.contains("design")) *design_echo = j.at("design");
    return s;
}

namespace {

McBands bands_from_json(const json& j) {
    McBands bands;
    auto read = [&](const char* key, std::map<VarKind, Band>& target) {
        if (!j.contains(key)) return;
        for (const auto& [name, range] : j.at(key).items()) {
            if (!range.is_array() || range.size() != 2)
                throw std::invalid_argument("bands: each entry must be [lo, hi]");
            target[var_kind_from_name(name)] = Band{range[0].get<double>(), range[1].get<double>()};
        }
    };
    read("rb", bands.rb);
    read("rs", bands.rs);
    read("coverage", bands.coverage);
    return bands;
}

}  // namespace

McGrid grid_from_json(const json& j, std::uint64_t master_seed) {
    McGrid grid;
    grid.base.master_seed = master_seed;

    const auto& pj = j.at("population");
    if (pj.contains("file")) {
        std::ifstream in(pj.at("file").get<std::string>());
        if (!in) throw std::invalid_argument("population file not readable: " +
                                             pj.at("file").get<std::string>());
        grid.base.fixed_population = read_population_csv(in);
        grid.icc = {std::numeric_limits<double>::quiet_NaN()};
    } else {
        json pcfg = pj;
        if (!pcfg.contains("icc")) pcfg["icc"] = 0.5;  // placeholder, per-cell value applies
        grid.base.population = sim_pop_config_from_json(pcfg);
    }

    if (j.contains("first_kind"))
        grid.base.first_kind = design_kind_from_name(j.at("first_kind").get<std::string>());
    grid.base.replicates = j.value("replicates", 1000);
    grid.base.reference_replicates = j.value("reference_replicates", 50000);
    grid.base.alpha = j.value("alpha", 0.025);
    grid.base.trunc_coeff = j.value("trunc_coeff", 0.25);
    if (j.contains("estimators")) {
        grid.base.estimators.clear();
        for (const auto& name : j.at("estimators"))
            grid.base.estimators.push_back(var_kind_from_name(name.get<std::string>()));
    }

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("icc")) grid.icc = g.at("icc").get<std::vector<double>>();
        grid.n_psu_sample = g.at("n_psu_sample").get<std::vector<int>>();
        grid.n_ssu_sample = g.at("n_ssu_sample").get<std::vector<int>>();
    } else {
        if (j.contains("icc")) grid.icc = {j.at("icc").get<double>()};
        grid.n_psu_sample = {j.at("n_psu_sample").get<int>()};
        grid.n_ssu_sample = {j.at("n_ssu_sample").get<int>()};
    }
    if (grid.icc.empty()) {
        if (!grid.base.fixed_population)
            throw std::invalid_argument("scenario: icc is required for synthetic populations");
        grid.icc = {std::numeric_limits<double>::quiet_NaN()};
    }
    if (j.contains("bands")) grid.bands = bands_from_json(j.at("bands"));
    return grid;
}

json report_to_json(const McReport& r) {
    json j;
    j["icc"] = r.icc;
    j["n_psu_sample"] = r.n_psu_sample;
    j["n_ssu_sample"] = r.n_ssu_sample;
    j["replicates"] = r.replicates;
    j["reference_replicates"] = r.reference_replicates;
    j["y_true"] = r.y_true;
    j["reference_variance"] = r.reference_variance;
    j["reference_se"] = r.reference_se;
    j["mean_estimate"] = r.mean_estimate;
    j["estimators"] = json::array();
    for (const auto& m : r.metrics) {
        json e;
        e["kind"] = var_kind_name(m.kind);
        e["available"] = m.available;
        if (!m.available) {
            e["error"] = m.error;
        } else {
            e["rb_pct"] = m.rb_pct;
            e["rs_pct"] = m.rs_pct;
            e["coverage"] = m.coverage;
            e["mean_vhat"] = m.mean_vhat;
            e["truncated_count"] = m.truncated_count;
            e["negative_count"] = m.negative_count;
        }
        j["estimators"].push_back(std::move(e));
    }
    return j;
}

namespace {

json opt(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

json assumption_report_to_json(const AssumptionReport& r) {
    json j;
    j["first_fraction"] = r.first_fraction;
    j["first_pi_ratio_min"] = r.first_pi_ratio_min;
    j["first_pi_ratio_max"] = r.first_pi_ratio_max;
    j["first_pair_dependence"] = opt(r.first_pair_dependence);
    j["first_quad_dependence"] = opt(r.first_quad_dependence);
    j["first_pair_ratio_min"] = opt(r.first_pair_ratio_min);
    j["first_pair_ratio_max"] = opt(r.first_pair_ratio_max);
    j["mean_psu_size"] = r.mean_psu_size;
    j["mean_ssu_sample"] = r.mean_ssu_sample;
    j["size_ratio_min"] = r.size_ratio_min;
    j["size_ratio_max"] = r.size_ratio_max;
    j["sample_ratio_min"] = r.sample_ratio_min;
    j["sample_ratio_max"] = r.sample_ratio_max;
    j["second_pi_ratio_min"] = r.second_pi_ratio_min;
    j["second_pi_ratio_max"] = r.second_pi_ratio_max;
    j["second_pair_dependence"] = opt(r.second_pair_dependence);
    j["second_pair_ratio_min"] = opt(r.second_pair_ratio_min);
    j["second_pair_ratio_max"] = opt(r.second_pair_ratio_max);
    j["value_mean"] = r.value_mean;
    j["value_fourth_moment"] = r.value_fourth_moment;
    j["normalized_first_variance"] = opt(r.normalized_first_variance);
    j["first_fraction_ok"] = r.first_fraction_ok;
    j["joint_positive"] = r.joint_positive ? json(*r.joint_positive) : json(nullptr);
    return j;
}

json decomposition_to_json(const VarianceDecomposition& d) {
    json j;
    j["v1"] = d.v1;
    j["v2"] = d.v2;
    j["v3"] = d.v3;
    j["total"] = d.total();
    return j;
}

}  // namespace twostage
