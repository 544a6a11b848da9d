#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dsmsim/config.hpp"
#include "dsmsim/csv.hpp"
#include "dsmsim/execution.hpp"
#include "dsmsim/game.hpp"
#include "dsmsim/neighbourhood.hpp"

namespace dsmsim {

namespace fs = std::filesystem;

// --- scenario assembly ------------------------------------------------------

// Category-balanced participant selection: starting from everybody,
// repeatedly drop one seeded-random participant per category (borrowing
// from the largest remaining category once one runs dry) until `target`
// households are left. Selection is progressive, so smaller targets are
// subsets of larger ones for the same seed.
inline std::vector<bool> select_participants(int households, const CategoryMix& mix, int target,
                                             std::uint64_t seed) {
    std::vector<bool> participant(households, true);
    if (target >= households) return participant;
    if (target < 0) target = 0;
    std::mt19937_64 rng(mix_seed(seed, 0x9a57ULL));
    std::vector<std::vector<int>> pool(3);
    for (int m = 0; m < households; ++m) {
        pool[static_cast<int>(category_of(m, mix))].push_back(m);
    }
    int remaining = households;
    const auto drop_from = [&](std::vector<int>& ids) {
        const std::size_t pick = static_cast<std::size_t>(rng() % ids.size());
        participant[ids[pick]] = false;
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pick));
        --remaining;
    };
    while (remaining > target) {
        for (int c = 0; c < 3 && remaining > target; ++c) {
            std::vector<int>* ids = &pool[c];
            if (ids->empty()) {
                std::size_t largest = 0;
                for (std::size_t k = 1; k < pool.size(); ++k) {
                    if (pool[k].size() > pool[largest].size()) largest = k;
                }
                ids = &pool[largest];
            }
            if (ids->empty()) return participant;
            drop_from(*ids);
        }
    }
    return participant;
}

// Participation counts visited by the sweep: full participation stepping
// down by `step` as long as at least one household remains.
inline std::vector<int> participation_targets(int households, int step) {
    std::vector<int> targets;
    for (int n = households; n >= 1; n -= step) targets.push_back(n);
    return targets;
}

inline std::vector<Household> build_households(const RunConfig& cfg,
                                               const std::vector<bool>& participant) {
    std::vector<Household> out(cfg.households);
    for (int m = 0; m < cfg.households; ++m) {
        Household& h = out[m];
        h.id = m;
        h.category = category_of(m, cfg.mix);
        h.participant = participant[m];
        if (h.participant) {
            h.pv_scale = cfg.pv_scales.of(h.category);
            h.battery = cfg.battery;
        }
        h.validate();
    }
    return out;
}

inline std::vector<DayTraces> build_traces(const RunConfig& cfg) {
    if (cfg.synthetic()) {
        std::vector<DayTraces> days;
        days.reserve(cfg.days);
        for (int day = 0; day < cfg.days; ++day) {
            days.push_back(
                synth_traces(mix_seed(cfg.seed, static_cast<std::uint64_t>(day)),
                             cfg.households, cfg.stages, cfg.mix));
        }
        return days;
    }
    std::vector<DayTraces> days = load_csv_traces(cfg.demand_csv, cfg.pv_csv, cfg.stages);
    if (days.empty() || days[0].actual_demand.size() != static_cast<std::size_t>(cfg.households)) {
        throw DataError(cfg.demand_csv + ": file has " +
                        std::to_string(days.empty() ? 0 : days[0].actual_demand.size()) +
                        " households, config expects " + std::to_string(cfg.households));
    }
    if (static_cast<int>(days.size()) < cfg.days) {
        throw DataError(cfg.demand_csv + ": only " + std::to_string(days.size()) +
                        " days of data, config requests " + std::to_string(cfg.days));
    }
    return days;
}

inline std::vector<bool> participation_flags(const RunConfig& cfg) {
    if (!cfg.participant_set.empty()) {
        std::vector<bool> flags(cfg.households, false);
        for (int id : cfg.participant_set) flags.at(id) = true;
        return flags;
    }
    const int target = static_cast<int>(std::lround(cfg.participation_rate * cfg.households));
    return select_participants(cfg.households, cfg.mix, target, cfg.seed);
}

inline ScenarioConfig scenario_from_config(const RunConfig& cfg,
                                           const std::vector<bool>& participant) {
    ScenarioConfig sc;
    sc.households = build_households(cfg, participant);
    sc.error = cfg.error;
    sc.days = cfg.days;
    sc.chain = cfg.chain;
    sc.stages = cfg.stages;
    sc.dt_hours = cfg.dt_hours;
    sc.tariff = cfg.tariff;
    sc.initial_soc = cfg.initial_soc;
    sc.solver = cfg.solver;
    return sc;
}

struct RunOutput {
    ScenarioConfig scenario;
    std::vector<DayRun> runs;
    SimulationReport summary;
};

inline RunOutput run_scenario(const RunConfig& cfg) {
    cfg.validate();
    RunOutput out;
    out.scenario = scenario_from_config(cfg, participation_flags(cfg));
    out.runs = chain_days(out.scenario, build_traces(cfg));
    out.summary = report(out.scenario, out.runs);
    return out;
}

// --- artifact emission --------------------------------------------------------

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << text;
    if (!out) throw IoError("failed while writing file: " + path.string());
}

inline std::string day_tag(int day) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", day);
    return buf;
}

// Writes the four per-run artifacts: per-day equilibrium schedules, per-day
// aggregate load curves, the summary report, and a manifest echoing the
// resolved configuration.
inline void write_run_artifacts(const fs::path& dir, const RunConfig& cfg, const RunOutput& out) {
    ensure_dir(dir);
    const std::vector<std::size_t> participants = participant_indices(out.scenario.households);
    const int T = out.scenario.stages;
    std::vector<std::string> schedule_header{"household"};
    for (int t = 0; t < T; ++t) schedule_header.push_back("stage_" + std::to_string(t));

    const std::vector<DayTraces> traces = build_traces(cfg);
    for (std::size_t day = 0; day < out.runs.size(); ++day) {
        const DayRun& run = out.runs[day];
        Table schedule_rows;
        for (std::size_t i = 0; i < participants.size(); ++i) {
            Series row{static_cast<double>(out.scenario.households[participants[i]].id)};
            row.insert(row.end(), run.profile.schedules[i].begin(),
                       run.profile.schedules[i].end());
            schedule_rows.push_back(std::move(row));
        }
        csvio::write_numeric((dir / ("schedules_day" + day_tag(static_cast<int>(day)) + ".csv")).string(),
                             schedule_header, schedule_rows);

        Table aggregate_rows;
        for (int t = 0; t < T; ++t) {
            double demand = 0.0;
            for (const Series& row : traces[day].actual_demand) demand += row[t];
            aggregate_rows.push_back({static_cast<double>(t), demand,
                                      run.reference.aggregate[t], run.result.aggregate_load[t]});
        }
        csvio::write_numeric((dir / ("aggregate_day" + day_tag(static_cast<int>(day)) + ".csv")).string(),
                             {"interval", "demand", "reference_load", "ne_load"}, aggregate_rows);
    }
    write_text(dir / "summary.json", report_to_json(out.summary).dump(2) + "\n");
    write_text(dir / "manifest.json", config_to_json(cfg).dump(2) + "\n");
}

inline void print_summary(const RunConfig& cfg, const RunOutput& out, std::ostream& os) {
    os << "mode=" << cfg.mode << " days=" << out.summary.days
       << " participants=" << participant_indices(out.scenario.households).size() << "/"
       << out.scenario.households.size() << " par_ref=" << out.summary.par_reference_mean
       << " par_dsm=" << out.summary.par_dsm_mean
       << " par_reduction=" << out.summary.par_reduction_mean * 100.0 << "%"
       << " savings=" << out.summary.savings_mean * 100.0 << "%"
       << " converged=" << (out.summary.all_converged ? "yes" : "no") << "\n";
}

inline SimulationReport run_single(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    RunOutput out = run_scenario(cfg);
    write_run_artifacts(out_dir, cfg, out);
    if (!quiet) print_summary(cfg, out, std::cout);
    return out.summary;
}

// --- sweeps -------------------------------------------------------------------

struct SweepRow {
    std::string neighbourhood;  // only used by the consumer-mix sweep
    double value = 0.0;
    SimulationReport summary;
};

namespace detail {

// Runs one configuration per point in parallel; each point writes its own
// subdirectory, the combined table is assembled afterwards.
inline std::vector<SweepRow> run_points(const std::vector<RunConfig>& points,
                                        const std::vector<std::string>& names,
                                        const std::vector<double>& values,
                                        const fs::path& out_dir, bool quiet) {
    std::vector<SweepRow> rows(points.size());
    std::vector<std::exception_ptr> failures(points.size());
    std::atomic<std::size_t> next{0};
    const unsigned workers =
        std::max(1u, std::min({static_cast<unsigned>(points.size()),
                               std::thread::hardware_concurrency(), 8u}));
    const auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            try {
                RunOutput out = run_scenario(points[i]);
                write_run_artifacts(out_dir / names[i], points[i], out);
                rows[i] = SweepRow{points[i].mode, values[i], out.summary};
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work);
    for (std::thread& th : threads) th.join();
    for (const std::exception_ptr& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }
    if (!quiet) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::cout << names[i] << ": value=" << values[i]
                      << " par_reduction=" << rows[i].summary.par_reduction_mean * 100.0 << "%"
                      << " savings=" << rows[i].summary.savings_mean * 100.0 << "%\n";
        }
    }
    return rows;
}

inline Table sweep_table(const std::vector<SweepRow>& rows) {
    Table table;
    for (const SweepRow& row : rows) {
        table.push_back({row.value, row.summary.par_reduction_mean, row.summary.par_reduction_std,
                         row.summary.savings_mean, row.summary.savings_std});
    }
    return table;
}

}  // namespace detail

inline void run_sweep_participation(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    const std::vector<int> targets = participation_targets(cfg.households, cfg.participation_step);
    std::vector<RunConfig> points;
    std::vector<std::string> names;
    std::vector<double> values;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        RunConfig point = cfg;
        point.participant_set.clear();
        const std::vector<bool> flags =
            select_participants(cfg.households, cfg.mix, targets[i], cfg.seed);
        for (int m = 0; m < cfg.households; ++m) {
            if (flags[m]) point.participant_set.push_back(m);
        }
        points.push_back(std::move(point));
        names.push_back("point_" + day_tag(static_cast<int>(i)));
        values.push_back(static_cast<double>(targets[i]) / cfg.households);
    }
    ensure_dir(out_dir);
    const std::vector<SweepRow> rows = detail::run_points(points, names, values, out_dir, quiet);
    csvio::write_numeric((out_dir / "sweep.csv").string(),
                         {"sweep_value", "par_reduction_mean", "par_reduction_std",
                          "savings_mean", "savings_std"},
                         detail::sweep_table(rows));
    write_text(out_dir / "manifest.json", config_to_json(cfg).dump(2) + "\n");
}

inline void run_sweep_error(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    std::vector<RunConfig> points;
    std::vector<std::string> names;
    std::vector<double> values;
    for (int i = 0;; ++i) {
        const double magnitude = i * cfg.error_step;
        if (magnitude > 1.0 + 1e-12) break;
        RunConfig point = cfg;
        point.error.magnitude = std::min(magnitude, 1.0);
        points.push_back(std::move(point));
        names.push_back("point_" + day_tag(i));
        values.push_back(std::min(magnitude, 1.0));
    }
    ensure_dir(out_dir);
    const std::vector<SweepRow> rows = detail::run_points(points, names, values, out_dir, quiet);
    csvio::write_numeric((out_dir / "sweep.csv").string(),
                         {"sweep_value", "par_reduction_mean", "par_reduction_std",
                          "savings_mean", "savings_std"},
                         detail::sweep_table(rows));
    write_text(out_dir / "manifest.json", config_to_json(cfg).dump(2) + "\n");
}

inline void run_sweep_consumer_mix(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    struct Neighbourhood {
        std::string name;
        CategoryMix mix;
    };
    const std::vector<Neighbourhood> kinds{
        {"mixed", cfg.mix},
        {"mono-low", {cfg.households, 0, 0}},
        {"mono-base", {0, cfg.households, 0}},
        {"mono-high", {0, 0, cfg.households}},
    };
    ensure_dir(out_dir);
    Table table;
    std::vector<std::string> table_names;
    for (const Neighbourhood& kind : kinds) {
        RunConfig base = cfg;
        base.mix = kind.mix;
        const std::vector<int> targets =
            participation_targets(base.households, base.participation_step);
        std::vector<RunConfig> points;
        std::vector<std::string> names;
        std::vector<double> values;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            RunConfig point = base;
            point.participant_set.clear();
            const std::vector<bool> flags =
                select_participants(base.households, base.mix, targets[i], base.seed);
            for (int m = 0; m < base.households; ++m) {
                if (flags[m]) point.participant_set.push_back(m);
            }
            points.push_back(std::move(point));
            names.push_back(kind.name + "/point_" + day_tag(static_cast<int>(i)));
            values.push_back(static_cast<double>(targets[i]) / base.households);
        }
        const std::vector<SweepRow> rows =
            detail::run_points(points, names, values, out_dir, quiet);
        for (const SweepRow& row : rows) {
            table.push_back({row.value, row.summary.par_reduction_mean,
                             row.summary.par_reduction_std, row.summary.savings_mean,
                             row.summary.savings_std});
            table_names.push_back(kind.name);
        }
    }
    // neighbourhood name leads each row; kept textual, so assemble by hand
    std::string text = "neighbourhood,sweep_value,par_reduction_mean,par_reduction_std,"
                       "savings_mean,savings_std\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        std::ostringstream line;
        line << std::setprecision(17) << table_names[i];
        for (double v : table[i]) line << ',' << v;
        text += line.str() + "\n";
    }
    write_text(out_dir / "sweep.csv", text);
    write_text(out_dir / "manifest.json", config_to_json(cfg).dump(2) + "\n");
}

// --- closed form vs dynamic programming check ----------------------------------

struct OracleCheckResult {
    int instances = 0;
    double max_discrepancy = 0.0;  // kWh, worst per-stage schedule difference
};

// Random single-player games with loose battery bounds, solved both by the
// stage-wise closed form and by the value-iteration oracle on a 0.01 kWh
// grid. Instances are resampled until the closed-form trajectory stays
// well inside the SOC range, so the two solutions should only differ by
// discretization error.
inline OracleCheckResult oracle_check(std::uint64_t seed, int instances) {
    std::mt19937_64 rng(splitmix64(seed ^ 0x0eac1eULL));
    OracleCheckResult result;
    result.instances = instances;
    SocGrid grid;  // 0.01 kWh resolution
    for (int i = 0; i < instances; ++i) {
        GameSpec spec;
        spec.stages = 2 + (i % 3);
        spec.dt_hours = 1.0;
        spec.tariff = TariffParams{};
        PlayerSpec player;
        player.battery = BatteryParams{};
        player.battery.capacity = 2.0;
        player.battery.cv_threshold = 1.5;
        Series others;
        Response closed;
        while (true) {
            player.initial_soc = 0.8 + 0.4 * uniform01(rng);
            player.net_demand.resize(spec.stages);
            others.resize(spec.stages);
            for (int t = 0; t < spec.stages; ++t) {
                player.net_demand[t] = 0.9 + 0.8 * uniform01(rng);
                others[t] = 5.0 + 3.0 * uniform01(rng);
            }
            spec.players = {player};
            spec.background_load = others;
            closed = best_response_schedule(spec, 0, others, TransitionMode::Idealized);
            bool interior = true;
            for (double s : closed.soc) interior = interior && s > 0.15 && s < 1.85;
            if (interior) break;
        }
        const Series dp = dp_best_response(spec, 0, others, grid, TransitionMode::Idealized);
        for (int t = 0; t < spec.stages; ++t) {
            result.max_discrepancy =
                std::max(result.max_discrepancy, std::abs(dp[t] - closed.schedule[t]));
        }
    }
    return result;
}

// --- mode dispatch ---------------------------------------------------------------

inline void run(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    cfg.validate();
    if (cfg.mode == "single") {
        run_single(cfg, out_dir, quiet);
    } else if (cfg.mode == "sweep-participation") {
        run_sweep_participation(cfg, out_dir, quiet);
    } else if (cfg.mode == "sweep-error") {
        run_sweep_error(cfg, out_dir, quiet);
    } else if (cfg.mode == "sweep-consumer-mix") {
        run_sweep_consumer_mix(cfg, out_dir, quiet);
    } else {  // oracle-check
        const OracleCheckResult res = oracle_check(cfg.seed, 100);
        ensure_dir(out_dir);
        json j;
        j["instances"] = res.instances;
        j["max_discrepancy_kwh"] = res.max_discrepancy;
        write_text(out_dir / "oracle_check.json", j.dump(2) + "\n");
        if (!quiet) {
            std::cout << "oracle check: " << res.instances
                      << " instances, max discrepancy " << res.max_discrepancy << " kWh\n";
        }
    }
}

}  // namespace dsmsim
