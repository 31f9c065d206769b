// Command-line surface: genpop, draw, estimate, exactvar, mc, couple, diagnose.
// Exit codes: 0 success, 2 validation/usage error, 3 acceptance-band violation.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "twostage/json_io.hpp"

namespace {

using nlohmann::json;
using namespace twostage;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    json j;
    in >> j;
    return j;
}

Population load_population(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    return read_population_csv(in);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << text;
}

void emit(const std::optional<std::string>& path, const std::string& text) {
    if (path) write_text(*path, text);
    else std::cout << text;
}

std::vector<double> psu_sizes(const Population& pop) {
    std::vector<double> sizes(std::size_t(pop.psu_count()));
    for (int i = 0; i < pop.psu_count(); ++i) sizes[std::size_t(i)] = double(pop.psu(i).size());
    return sizes;
}

struct Options {
    std::string config, pop, design, sample, scenario, out, json_out;
    std::string estimators = "haj,haj_a";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool trunc_set = false;
    int workers = 0;
    double trunc_coeff = 0.25;
    double alpha = 0.025;
};

int cmd_genpop(const Options& opt) {
    json j = load_json(opt.config);
    if (opt.seed_set) j["seed"] = opt.seed;
    if (!j.contains("seed"))
        throw std::invalid_argument("genpop: a seed is required (config key or --seed)");
    const Population pop = generate_sim_population(sim_pop_config_from_json(j));
    std::ostringstream os;
    write_population_csv(pop, os);
    emit(opt.out.empty() ? std::nullopt : std::optional(opt.out), os.str());
    return 0;
}

int cmd_draw(const Options& opt) {
    if (!opt.seed_set) throw std::invalid_argument("draw: --seed is required");
    const Population pop = load_population(opt.pop);
    const json design_json = load_json(opt.design);
    const TwoStageDesign design = two_stage_design_from_json(design_json, pop);
    RngStream rng(opt.seed);
    const TwoStageSample s = draw_two_stage(pop, design, rng);
    emit(opt.out.empty() ? std::nullopt : std::optional(opt.out),
         sample_to_json(s, design_json).dump(2) + "\n");
    return 0;
}

int cmd_estimate(const Options& opt) {
    const Population pop = load_population(opt.pop);
    json design_echo;
    const TwoStageSample s = sample_from_json(load_json(opt.sample), &design_echo);
    if (design_echo.is_null())
        throw std::invalid_argument("estimate: the sample file carries no design");
    const TwoStageDesign design = two_stage_design_from_json(design_echo, pop);

    std::vector<VarKind> kinds;
    std::stringstream ss(opt.estimators);
    std::string tok;
    while (std::getline(ss, tok, ',')) kinds.push_back(var_kind_from_name(tok));

    std::vector<InclusionView> second;
    second.reserve(s.psus.size());
    for (int i : s.psus) second.push_back(design.second[std::size_t(i)].view());

    json out;
    out["ht_estimate"] = ht_estimate(s, pop);
    out["estimators"] = json::object();

    std::optional<VarEstimate> haj, ht, yg;
    for (VarKind kind : kinds) {
        VarEstimate est;
        switch (kind) {
            case VarKind::haj: case VarKind::haj_a:
                if (!haj) haj = vhat_hajek(s, pop, second, opt.trunc_coeff);
                est = *haj;
                break;
            case VarKind::ht: case VarKind::ht_a:
                if (!ht) ht = vhat_ht(s, pop, design.first_view(), second);
                est = *ht;
                break;
            case VarKind::yg: case VarKind::yg_a:
                if (!yg) yg = vhat_yg(s, pop, design.first_view(), second);
                est = *yg;
                break;
        }
        if (var_kind_is_simplified(kind)) est = simplified(est);
        json e;
        e["a_term"] = est.a_term;
        e["b_term"] = est.b_term;
        e["total"] = est.total;
        e["truncated"] = est.truncated;
        if (est.total >= 0.0) {
            const CiResult ci = confidence_interval(out["ht_estimate"].get<double>(), est.total,
                                                    opt.alpha);
            e["ci"] = {{"lower", ci.lower}, {"upper", ci.upper}, {"alpha", ci.alpha}};
        }
        out["estimators"][var_kind_name(kind)] = std::move(e);
    }
    emit(opt.out.empty() ? std::nullopt : std::optional(opt.out), out.dump(2) + "\n");
    return 0;
}

int cmd_exactvar(const Options& opt) {
    const Population pop = load_population(opt.pop);
    const TwoStageDesign design = two_stage_design_from_json(load_json(opt.design), pop);
    emit(opt.out.empty() ? std::nullopt : std::optional(opt.out),
         decomposition_to_json(exact_variance(pop, design)).dump(2) + "\n");
    return 0;
}

int cmd_diagnose(const Options& opt) {
    const Population pop = load_population(opt.pop);
    const TwoStageDesign design = two_stage_design_from_json(load_json(opt.design), pop);
    emit(opt.out.empty() ? std::nullopt : std::optional(opt.out),
         assumption_report_to_json(check_assumptions(pop, design)).dump(2) + "\n");
    return 0;
}

int cmd_mc(const Options& opt) {
    if (!opt.seed_set) throw std::invalid_argument("mc: --seed is required");
    json j = load_json(opt.scenario);
    McGrid grid = grid_from_json(j, opt.seed);
    grid.base.workers = opt.workers;
    if (opt.trunc_set) grid.base.trunc_coeff = opt.trunc_coeff;

    const GridResult result = run_grid(grid);
    const std::string csv = emit_table_csv(result.reports);
    if (!opt.out.empty()) {
        write_text(opt.out, csv);
        std::cout << emit_table_text(result.reports);
    } else {
        std::cout << csv;
    }
    if (!opt.json_out.empty()) {
        json reports = json::array();
        for (const auto& r : result.reports) reports.push_back(report_to_json(r));
        write_text(opt.json_out, reports.dump(2) + "\n");
    }
    if (!result.violations.empty()) {
        for (const auto& v : result.violations) std::cerr << "band violation: " << v << "\n";
        return 3;
    }
    return 0;
}

int cmd_couple(const Options& opt) {
    if (!opt.seed_set) throw std::invalid_argument("couple: --seed is required");
    const Population pop = load_population(opt.pop);
    const json j = load_json(opt.config);
    const auto sizes = psu_sizes(pop);

    const Design design_p = design_from_json(j.at("design_p"), sizes);
    const Design design_r = design_from_json(j.at("design_r"), sizes);
    std::vector<Design> second;
    second.reserve(sizes.size());
    for (int i = 0; i < pop.psu_count(); ++i)
        second.push_back(second_stage_design_from_json(j.at("second"), pop.psu(i).size()));
    const int replicates = j.value("replicates", 10000);

    const EnumeratedDesign p = design_p.enumerate();
    const EnumeratedDesign r = design_r.enumerate();
    const DesignDistances dist = distances(p, r);
    RngStream rng(opt.seed);
    const GapResult gap = coupling_gap(p, r, second, pop, replicates, rng);

    const auto finite_or_inf = [](double v) {
        return std::isfinite(v) ? json(v) : json("inf");
    };
    json out;
    out["tv"] = dist.tv;
    out["chi2"] = finite_or_inf(dist.chi2);
    out["kl"] = finite_or_inf(dist.kl);
    out["alpha"] = dist.alpha;
    out["empirical_gap"] = gap.empirical;
    out["gap_se"] = gap.mc_se;
    out["bound"] = gap.bound;
    emit(opt.out.empty() ? std::nullopt : std::optional(opt.out), out.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-based inference for two-stage sampling"};
    app.require_subcommand(1);
    Options opt;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", opt.seed, "master seed")->each([&](const std::string&) {
            opt.seed_set = true;
        });
    };

    auto* genpop = app.add_subcommand("genpop", "generate a synthetic population");
    genpop->add_option("--config", opt.config, "population config (json)")->required();
    genpop->add_option("--out", opt.out, "output csv");
    add_seed(genpop);

    auto* draw = app.add_subcommand("draw", "draw one two-stage sample");
    draw->add_option("--pop", opt.pop, "population csv")->required();
    draw->add_option("--design", opt.design, "two-stage design (json)")->required();
    draw->add_option("--out", opt.out, "output sample (json)");
    add_seed(draw);

    auto* estimate = app.add_subcommand("estimate", "estimate a total and its variance from a sample");
    estimate->add_option("--pop", opt.pop, "population csv")->required();
    estimate->add_option("--sample", opt.sample, "sample json (from draw)")->required();
    estimate->add_option("--estimators", opt.estimators, "comma list: ht,yg,haj,ht_a,yg_a,haj_a");
    estimate->add_option("--trunc-coeff", opt.trunc_coeff, "hajek truncation coefficient");
    estimate->add_option("--alpha", opt.alpha, "one-tailed interval level");
    estimate->add_option("--out", opt.out, "output json");

    auto* exactvar = app.add_subcommand("exactvar", "exact variance decomposition");
    exactvar->add_option("--pop", opt.pop, "population csv")->required();
    exactvar->add_option("--design", opt.design, "two-stage design (json)")->required();
    exactvar->add_option("--out", opt.out, "output json");

    auto* mc = app.add_subcommand("mc", "run a Monte Carlo study");
    mc->add_option("--scenario", opt.scenario, "scenario file (json)")->required();
    mc->add_option("--out", opt.out, "output csv");
    mc->add_option("--json-out", opt.json_out, "full report (json)");
    mc->add_option("--workers", opt.workers, "worker threads (0 = hardware)");
    mc->add_option("--trunc-coeff", opt.trunc_coeff, "hajek truncation coefficient")
        ->each([&](const std::string&) { opt.trunc_set = true; });
    add_seed(mc);

    auto* couple = app.add_subcommand("couple", "couple two first-stage designs and report distances");
    couple->add_option("--pop", opt.pop, "population csv")->required();
    couple->add_option("--config", opt.config, "coupling config (json)")->required();
    couple->add_option("--out", opt.out, "output json");
    add_seed(couple);

    auto* diagnose = app.add_subcommand("diagnose", "report design regularity constants");
    diagnose->add_option("--pop", opt.pop, "population csv")->required();
    diagnose->add_option("--design", opt.design, "two-stage design (json)")->required();
    diagnose->add_option("--out", opt.out, "output json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (genpop->parsed()) return cmd_genpop(opt);
        if (draw->parsed()) return cmd_draw(opt);
        if (estimate->parsed()) return cmd_estimate(opt);
        if (exactvar->parsed()) return cmd_exactvar(opt);
        if (mc->parsed()) return cmd_mc(opt);
        if (couple->parsed()) return cmd_couple(opt);
        if (diagnose->parsed()) return cmd_diagnose(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
