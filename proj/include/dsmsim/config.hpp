#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "dsmsim/battery.hpp"
#include "dsmsim/common.hpp"
#include "dsmsim/execution.hpp"
#include "dsmsim/neighbourhood.hpp"
#include "dsmsim/tariff.hpp"

namespace dsmsim {

using nlohmann::json;

// Per-category PV installation scale factors.
struct PvScales {
    double low = 0.3;
    double base = 0.5;
    double high = 0.7;

    double of(Category c) const {
        switch (c) {
            case Category::Low: return low;
            case Category::Base: return base;
            default: return high;
        }
    }
};

// Fully resolved run configuration. The defaults describe the reference
// scenario: a 25-household mixed neighbourhood on synthetic traces with a
// Powerwall-2-class battery per participant.
struct RunConfig {
    std::string mode = "single";  // single | sweep-participation | sweep-error |
                                  // sweep-consumer-mix | oracle-check
    // data source: csv paths, or synthetic when both are empty
    std::string demand_csv;
    std::string pv_csv;
    std::uint64_t seed = 1;
    int households = 25;
    CategoryMix mix{7, 9, 9};

    int stages = 24;
    double dt_hours = 1.0;
    int days = 1;
    bool chain = true;
    double initial_soc = 0.0;

    TariffParams tariff{};
    BatteryParams battery{};
    ForecastErrorSpec error{};
    PvScales pv_scales{};
    SolveOptions solver{};

    double participation_rate = 1.0;
    std::vector<int> participant_set;  // explicit override; empty = use the rate

    int participation_step = 3;  // households removed per sweep point
    double error_step = 0.1;     // magnitude increment for the error sweep

    std::string output_dir = "out";

    bool synthetic() const { return demand_csv.empty() && pv_csv.empty(); }

    void validate() const {
        static const char* kModes[] = {"single", "sweep-participation", "sweep-error",
                                       "sweep-consumer-mix", "oracle-check"};
        bool ok = false;
        for (const char* m : kModes) ok = ok || mode == m;
        if (!ok) throw ConfigError("config: unknown mode '" + mode + "'");
        if (demand_csv.empty() != pv_csv.empty()) {
            throw ConfigError("config: demand_csv and pv_csv must be given together");
        }
        if (!synthetic()) {
            if (!std::filesystem::exists(demand_csv)) {
                throw ConfigError("config: demand csv does not exist: " + demand_csv);
            }
            if (!std::filesystem::exists(pv_csv)) {
                throw ConfigError("config: pv csv does not exist: " + pv_csv);
            }
        }
        if (households < 1) throw ConfigError("config: households must be >= 1");
        if (mix.total() != households) {
            throw ConfigError("config: category mix must sum to the household count");
        }
        if (stages < 2) throw ConfigError("config: stages must be >= 2");
        if (!(dt_hours > 0.0)) throw ConfigError("config: dt_hours must be > 0");
        if (days < 1) throw ConfigError("config: days must be >= 1");
        if (!(participation_rate >= 0.0 && participation_rate <= 1.0)) {
            throw ConfigError("config: participation rate must be in [0, 1]");
        }
        for (int id : participant_set) {
            if (id < 0 || id >= households) {
                throw ConfigError("config: participant id " + std::to_string(id) +
                                  " outside household range");
            }
        }
        if (participation_step < 1) throw ConfigError("config: sweep step must be >= 1");
        if (!(error_step > 0.0 && error_step <= 1.0)) {
            throw ConfigError("config: error step must be in (0, 1]");
        }
        try {
            tariff.validate();
            battery.validate();
            error.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        if (!(solver.tolerance > 0.0) || solver.max_sweeps < 1) {
            throw ConfigError("config: solver tolerance must be > 0 and max_iterations >= 1");
        }
    }
};

namespace detail {

inline void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("config: unknown key '" + where + it.key() + "'");
    }
}

template <class T>
void maybe(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + where + key + "'");
    }
}

}  // namespace detail

// Parses a configuration document; absent keys keep their defaults, so an
// empty object yields the reference scenario.
inline RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    detail::expect_keys(j,
                        {"mode", "data", "seed", "stages", "dt_hours", "days", "chain_days",
                         "initial_soc", "tariff", "battery", "error", "pv_scale",
                         "participation", "solver", "sweep", "output"},
                        "");
    RunConfig cfg;
    detail::maybe(j, "mode", cfg.mode, "");
    detail::maybe(j, "seed", cfg.seed, "");
    detail::maybe(j, "stages", cfg.stages, "");
    detail::maybe(j, "dt_hours", cfg.dt_hours, "");
    detail::maybe(j, "days", cfg.days, "");
    detail::maybe(j, "chain_days", cfg.chain, "");
    detail::maybe(j, "initial_soc", cfg.initial_soc, "");
    detail::maybe(j, "output", cfg.output_dir, "");

    if (j.contains("data")) {
        const json& d = j.at("data");
        detail::expect_keys(d, {"demand_csv", "pv_csv", "synthetic"}, "data.");
        const bool has_csv = d.contains("demand_csv") || d.contains("pv_csv");
        if (has_csv && d.contains("synthetic")) {
            throw ConfigError("config: choose either csv paths or synthetic data, not both");
        }
        detail::maybe(d, "demand_csv", cfg.demand_csv, "data.");
        detail::maybe(d, "pv_csv", cfg.pv_csv, "data.");
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            detail::expect_keys(s, {"households", "mix"}, "data.synthetic.");
            detail::maybe(s, "households", cfg.households, "data.synthetic.");
            if (s.contains("mix")) {
                const json& mx = s.at("mix");
                detail::expect_keys(mx, {"low", "base", "high"}, "data.synthetic.mix.");
                detail::maybe(mx, "low", cfg.mix.low, "data.synthetic.mix.");
                detail::maybe(mx, "base", cfg.mix.base, "data.synthetic.mix.");
                detail::maybe(mx, "high", cfg.mix.high, "data.synthetic.mix.");
            }
        }
    }

    if (j.contains("tariff")) {
        const json& t = j.at("tariff");
        detail::expect_keys(t, {"c2", "c1", "c0", "fixed_price"}, "tariff.");
        detail::maybe(t, "c2", cfg.tariff.c2, "tariff.");
        detail::maybe(t, "c1", cfg.tariff.c1, "tariff.");
        detail::maybe(t, "c0", cfg.tariff.c0, "tariff.");
        detail::maybe(t, "fixed_price", cfg.tariff.fixed_price, "tariff.");
    }

    if (j.contains("battery")) {
        const json& b = j.at("battery");
        detail::expect_keys(b,
                            {"eta_plus", "eta_minus", "eta_inv", "rho_plus", "rho_minus",
                             "rho_bar", "s_max", "s_min", "s_star"},
                            "battery.");
        detail::maybe(b, "eta_plus", cfg.battery.eta_charge, "battery.");
        detail::maybe(b, "eta_minus", cfg.battery.eta_discharge, "battery.");
        detail::maybe(b, "eta_inv", cfg.battery.eta_inverter, "battery.");
        detail::maybe(b, "rho_plus", cfg.battery.charge_rate, "battery.");
        detail::maybe(b, "rho_minus", cfg.battery.discharge_rate, "battery.");
        detail::maybe(b, "rho_bar", cfg.battery.self_discharge, "battery.");
        detail::maybe(b, "s_max", cfg.battery.capacity, "battery.");
        detail::maybe(b, "s_min", cfg.battery.soc_min, "battery.");
        detail::maybe(b, "s_star", cfg.battery.cv_threshold, "battery.");
    }

    if (j.contains("error")) {
        const json& e = j.at("error");
        detail::expect_keys(e, {"eps_d", "eps_w", "magnitude"}, "error.");
        detail::maybe(e, "eps_d", cfg.error.demand_error, "error.");
        detail::maybe(e, "eps_w", cfg.error.pv_error, "error.");
        detail::maybe(e, "magnitude", cfg.error.magnitude, "error.");
    }

    if (j.contains("pv_scale")) {
        const json& p = j.at("pv_scale");
        detail::expect_keys(p, {"low", "base", "high"}, "pv_scale.");
        detail::maybe(p, "low", cfg.pv_scales.low, "pv_scale.");
        detail::maybe(p, "base", cfg.pv_scales.base, "pv_scale.");
        detail::maybe(p, "high", cfg.pv_scales.high, "pv_scale.");
    }

    if (j.contains("participation")) {
        const json& p = j.at("participation");
        detail::expect_keys(p, {"rate", "set"}, "participation.");
        if (p.contains("rate") && p.contains("set")) {
            throw ConfigError("config: give participation.rate or participation.set, not both");
        }
        detail::maybe(p, "rate", cfg.participation_rate, "participation.");
        detail::maybe(p, "set", cfg.participant_set, "participation.");
    }

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        detail::expect_keys(s, {"tolerance", "max_iterations", "init", "mode"}, "solver.");
        detail::maybe(s, "tolerance", cfg.solver.tolerance, "solver.");
        detail::maybe(s, "max_iterations", cfg.solver.max_sweeps, "solver.");
        std::string init = cfg.solver.init == SolveOptions::Init::Zeros ? "zeros" : "random";
        detail::maybe(s, "init", init, "solver.");
        if (init == "zeros") {
            cfg.solver.init = SolveOptions::Init::Zeros;
        } else if (init == "random") {
            cfg.solver.init = SolveOptions::Init::Random;
        } else {
            throw ConfigError("config: solver.init must be 'zeros' or 'random'");
        }
        std::string mode = cfg.solver.mode == TransitionMode::Idealized ? "idealized" : "clamped";
        detail::maybe(s, "mode", mode, "solver.");
        if (mode == "idealized") {
            cfg.solver.mode = TransitionMode::Idealized;
        } else if (mode == "clamped") {
            cfg.solver.mode = TransitionMode::Clamped;
        } else {
            throw ConfigError("config: solver.mode must be 'idealized' or 'clamped'");
        }
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        detail::expect_keys(s, {"participation_step", "error_step"}, "sweep.");
        detail::maybe(s, "participation_step", cfg.participation_step, "sweep.");
        detail::maybe(s, "error_step", cfg.error_step, "sweep.");
    }

    cfg.solver.seed = cfg.seed;
    return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return parse_config(j);
}

// Resolved-config echo written into the run manifest.
inline json config_to_json(const RunConfig& cfg) {
    json j;
    j["mode"] = cfg.mode;
    j["seed"] = cfg.seed;
    if (cfg.synthetic()) {
        j["data"]["synthetic"] = {{"households", cfg.households},
                                  {"mix",
                                   {{"low", cfg.mix.low},
                                    {"base", cfg.mix.base},
                                    {"high", cfg.mix.high}}}};
    } else {
        j["data"] = {{"demand_csv", cfg.demand_csv}, {"pv_csv", cfg.pv_csv}};
    }
    j["stages"] = cfg.stages;
    j["dt_hours"] = cfg.dt_hours;
    j["days"] = cfg.days;
    j["chain_days"] = cfg.chain;
    j["initial_soc"] = cfg.initial_soc;
    j["tariff"] = {{"c2", cfg.tariff.c2},
                   {"c1", cfg.tariff.c1},
                   {"c0", cfg.tariff.c0},
                   {"fixed_price", cfg.tariff.fixed_price}};
    j["battery"] = {{"eta_plus", cfg.battery.eta_charge},
                    {"eta_minus", cfg.battery.eta_discharge},
                    {"eta_inv", cfg.battery.eta_inverter},
                    {"rho_plus", cfg.battery.charge_rate},
                    {"rho_minus", cfg.battery.discharge_rate},
                    {"rho_bar", cfg.battery.self_discharge},
                    {"s_max", cfg.battery.capacity},
                    {"s_min", cfg.battery.soc_min},
                    {"s_star", cfg.battery.cv_threshold}};
    j["error"] = {{"eps_d", cfg.error.demand_error},
                  {"eps_w", cfg.error.pv_error},
                  {"magnitude", cfg.error.magnitude}};
    j["pv_scale"] = {{"low", cfg.pv_scales.low},
                     {"base", cfg.pv_scales.base},
                     {"high", cfg.pv_scales.high}};
    if (cfg.participant_set.empty()) {
        j["participation"] = {{"rate", cfg.participation_rate}};
    } else {
        j["participation"] = {{"set", cfg.participant_set}};
    }
    j["solver"] = {
        {"tolerance", cfg.solver.tolerance},
        {"max_iterations", cfg.solver.max_sweeps},
        {"init", cfg.solver.init == SolveOptions::Init::Zeros ? "zeros" : "random"},
        {"mode", cfg.solver.mode == TransitionMode::Idealized ? "idealized" : "clamped"}};
    j["sweep"] = {{"participation_step", cfg.participation_step},
                  {"error_step", cfg.error_step}};
    j["output"] = cfg.output_dir;
    return j;
}

inline json report_to_json(const SimulationReport& rep) {
    json j;
    j["days"] = rep.days;
    j["all_converged"] = rep.all_converged;
    j["par"] = {{"reference_mean", rep.par_reference_mean},
                {"dsm_mean", rep.par_dsm_mean},
                {"reduction_mean", rep.par_reduction_mean},
                {"reduction_std", rep.par_reduction_std},
                {"daily_reduction", rep.daily_par_reduction}};
    j["savings"] = {{"mean", rep.savings_mean},
                    {"std_between_participants", rep.savings_std},
                    {"per_participant", rep.participant_savings}};
    j["convergence"] = {{"residuals_per_day", rep.residuals_per_day}};
    return j;
}

inline SimulationReport report_from_json(const json& j) {
    SimulationReport rep;
    rep.days = j.at("days").get<int>();
    rep.all_converged = j.at("all_converged").get<bool>();
    rep.par_reference_mean = j.at("par").at("reference_mean").get<double>();
    rep.par_dsm_mean = j.at("par").at("dsm_mean").get<double>();
    rep.par_reduction_mean = j.at("par").at("reduction_mean").get<double>();
    rep.par_reduction_std = j.at("par").at("reduction_std").get<double>();
    rep.daily_par_reduction = j.at("par").at("daily_reduction").get<Series>();
    rep.savings_mean = j.at("savings").at("mean").get<double>();
    rep.savings_std = j.at("savings").at("std_between_participants").get<double>();
    rep.participant_savings = j.at("savings").at("per_participant").get<Series>();
    rep.residuals_per_day = j.at("convergence").at("residuals_per_day").get<Table>();
    return rep;
}

}  // namespace dsmsim
