#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dsmsim/battery.hpp"
#include "dsmsim/common.hpp"
#include "dsmsim/game.hpp"
#include "dsmsim/neighbourhood.hpp"
#include "dsmsim/tariff.hpp"

namespace dsmsim {

// Peak-to-average ratio of an aggregate load profile; 1 means perfectly
// flat.
inline double par(const Series& aggregate) {
    if (aggregate.empty()) throw std::invalid_argument("par: empty load profile");
    double total = 0.0;
    double peak = 0.0;
    for (double x : aggregate) {
        total += x;
        peak = std::max(peak, x);
    }
    if (!(total > 0.0)) throw std::domain_error("par: total load must be positive");
    return static_cast<double>(aggregate.size()) * peak / total;
}

// Signed relative change; negative values are improvements.
inline double par_reduction(double par_dsm, double par_reference) {
    return (par_dsm - par_reference) / par_reference;
}

// Outcome of executing one day against actual traces.
struct DayResult {
    Table realized_loads;     // M x T
    Series realized_soc_end;  // per participant
    Series aggregate_load;    // T
    double par = 1.0;
    Series bills;             // per household
    Table deviations;         // N x T, |executed - scheduled|
};

inline std::vector<std::size_t> participant_indices(const std::vector<Household>& households) {
    std::vector<std::size_t> idx;
    for (std::size_t m = 0; m < households.size(); ++m) {
        if (households[m].participant) idx.push_back(m);
    }
    return idx;
}

// Applies scheduled decisions to the actual day. Per interval and
// participant: actual PV surplus force-charges the battery DC-side (only
// the charging efficiency applies), the scheduled decision is projected
// onto what the battery and the actual net demand admit, and the full
// transition updates the SOC. Non-participant loads pass through
// unchanged.
inline DayResult execute_day(const Table& schedules, const DayTraces& traces,
                             const Series& initial_socs,
                             const std::vector<Household>& households,
                             const TariffParams& tariff, double dt_hours) {
    const std::size_t M = households.size();
    if (traces.actual_demand.size() != M) {
        throw std::invalid_argument("execute_day: traces do not match the household list");
    }
    const std::size_t T = traces.actual_pv.size();
    const std::vector<std::size_t> participants = participant_indices(households);
    const std::size_t N = participants.size();
    if (schedules.size() != N || initial_socs.size() != N) {
        throw std::invalid_argument("execute_day: need one schedule and one SOC per participant");
    }

    DayResult r;
    r.realized_loads.assign(M, Series(T, 0.0));
    r.aggregate_load.assign(T, 0.0);
    r.deviations.assign(N, Series(T, 0.0));
    r.realized_soc_end = initial_socs;

    std::vector<ChargeCurve> curves(N);
    for (std::size_t i = 0; i < N; ++i) {
        curves[i] = derive_charge_curve(*households[participants[i]].battery);
    }

    for (std::size_t t = 0; t < T; ++t) {
        std::size_t i = 0;
        for (std::size_t m = 0; m < M; ++m) {
            const Household& h = households[m];
            if (!h.participant) {
                r.realized_loads[m][t] = traces.actual_demand[m][t];
                continue;
            }
            const BatteryParams& bat = *h.battery;
            const NetDemand nd = net_demand(traces.actual_demand[m][t],
                                            h.pv_scale * traces.actual_pv[t], bat.eta_inverter);
            double soc = r.realized_soc_end[i];
            if (nd.excess_pv > 0.0) {
                const double intake =
                    std::min(nd.excess_pv, charge_limit(soc, bat, curves[i], dt_hours));
                soc += bat.eta_charge * intake;  // remainder is curtailed
            }
            const double executed =
                clamp_decision(soc, schedules[i][t], nd.net, bat, curves[i], dt_hours);
            r.realized_soc_end[i] = next_soc(soc, executed, bat, dt_hours);
            r.realized_loads[m][t] = load(nd.net, executed);
            r.deviations[i][t] = std::abs(executed - schedules[i][t]);
            ++i;
        }
        for (std::size_t m = 0; m < M; ++m) r.aggregate_load[t] += r.realized_loads[m][t];
    }

    r.par = par(r.aggregate_load);

    Table participant_loads(N);
    for (std::size_t i = 0; i < N; ++i) participant_loads[i] = r.realized_loads[participants[i]];
    const BillingResult billing = bill_participants(participant_loads, r.aggregate_load, tariff);
    r.bills.assign(M, 0.0);
    for (std::size_t i = 0; i < N; ++i) r.bills[participants[i]] = billing.bills[i];
    for (std::size_t m = 0; m < M; ++m) {
        if (!households[m].participant) {
            r.bills[m] = bill_nonparticipant(r.realized_loads[m], tariff);
        }
    }
    return r;
}

// What the same day looks like with every battery idle: participants draw
// their PV-adjusted net demand, everyone else their demand. Used as the
// baseline for PAR reduction and bill savings.
struct ReferenceDay {
    Table loads;       // M x T
    Series aggregate;  // T
    double par = 1.0;
    Series bills;      // per household
};

inline ReferenceDay reference_day(const DayTraces& traces,
                                  const std::vector<Household>& households,
                                  const TariffParams& tariff) {
    const std::size_t M = households.size();
    const std::size_t T = traces.actual_pv.size();
    ReferenceDay ref;
    ref.loads.assign(M, Series(T, 0.0));
    ref.aggregate.assign(T, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        const Household& h = households[m];
        for (std::size_t t = 0; t < T; ++t) {
            double l = traces.actual_demand[m][t];
            if (h.participant) {
                l = net_demand(l, h.pv_scale * traces.actual_pv[t], h.battery->eta_inverter).net;
            }
            ref.loads[m][t] = l;
            ref.aggregate[t] += l;
        }
    }
    ref.par = par(ref.aggregate);
    const std::vector<std::size_t> participants = participant_indices(households);
    Table participant_loads(participants.size());
    for (std::size_t i = 0; i < participants.size(); ++i) {
        participant_loads[i] = ref.loads[participants[i]];
    }
    const BillingResult billing = bill_participants(participant_loads, ref.aggregate, tariff);
    ref.bills.assign(M, 0.0);
    for (std::size_t i = 0; i < participants.size(); ++i) {
        ref.bills[participants[i]] = billing.bills[i];
    }
    for (std::size_t m = 0; m < M; ++m) {
        if (!households[m].participant) {
            ref.bills[m] = bill_nonparticipant(ref.loads[m], tariff);
        }
    }
    return ref;
}

// Scenario for one simulation run: who participates with what equipment,
// which errors apply, and how days connect.
struct ScenarioConfig {
    std::vector<Household> households;
    ForecastErrorSpec error;
    int days = 1;
    bool chain = true;            // carry realized SOC into the next day
    int stages = 24;
    double dt_hours = 1.0;
    TariffParams tariff;
    double initial_soc = 0.0;     // day-0 SOC for every participant
    SolveOptions solver;

    void validate() const {
        if (days < 1) throw std::invalid_argument("scenario: days must be >= 1");
        if (stages < 1) throw std::invalid_argument("scenario: stages must be >= 1");
        if (!(dt_hours > 0.0)) throw std::invalid_argument("scenario: dt_hours must be > 0");
        tariff.validate();
        error.validate();
        for (const Household& h : households) h.validate();
    }
};

// Everything produced for one simulated day.
struct DayRun {
    DayResult result;
    StrategyProfile profile;      // equilibrium schedules on the forecasts
    ReferenceDay reference;
};

// Builds the game a scenario implies for one day's forecasts.
inline GameSpec game_from_forecasts(const ScenarioConfig& sc, const DayTraces& traces,
                                    const Series& initial_socs) {
    GameSpec spec;
    spec.stages = sc.stages;
    spec.dt_hours = sc.dt_hours;
    spec.tariff = sc.tariff;
    spec.background_load.assign(sc.stages, 0.0);
    std::size_t i = 0;
    for (std::size_t m = 0; m < sc.households.size(); ++m) {
        const Household& h = sc.households[m];
        if (!h.participant) {
            for (int t = 0; t < sc.stages; ++t) {
                spec.background_load[t] += traces.forecast_demand[m][t];
            }
            continue;
        }
        PlayerSpec player;
        player.battery = *h.battery;
        player.initial_soc = initial_socs[i];
        player.net_demand.resize(sc.stages);
        for (int t = 0; t < sc.stages; ++t) {
            player.net_demand[t] = net_demand(traces.forecast_demand[m][t],
                                              h.pv_scale * traces.forecast_pv[t],
                                              h.battery->eta_inverter)
                                       .net;
        }
        spec.players.push_back(std::move(player));
        ++i;
    }
    return spec;
}

// Runs the daily protocol over consecutive days: forecast, solve the game,
// execute against actuals, and (when chaining) start the next day from the
// realized SOC.
inline std::vector<DayRun> chain_days(const ScenarioConfig& sc,
                                      const std::vector<DayTraces>& days) {
    sc.validate();
    if (days.empty()) throw std::invalid_argument("chain_days: no traces supplied");
    if (sc.days > static_cast<int>(days.size())) {
        throw std::invalid_argument("chain_days: fewer trace days than requested");
    }
    const std::vector<std::size_t> participants = participant_indices(sc.households);
    Series socs(participants.size(), sc.initial_soc);
    std::vector<DayRun> runs;
    runs.reserve(sc.days);
    for (int day = 0; day < sc.days; ++day) {
        if (!sc.chain) socs.assign(participants.size(), sc.initial_soc);
        const DayTraces traces = apply_worst_case_error(days[day], sc.error);
        const GameSpec spec = game_from_forecasts(sc, traces, socs);
        DayRun run;
        run.profile = solve_nash(spec, sc.solver);
        run.result = execute_day(run.profile.schedules, traces, socs, sc.households, sc.tariff,
                                 sc.dt_hours);
        run.reference = reference_day(traces, sc.households, sc.tariff);
        socs = run.result.realized_soc_end;
        runs.push_back(std::move(run));
    }
    return runs;
}

// Aggregated statistics over a set of day runs.
struct SimulationReport {
    int days = 0;
    bool all_converged = true;
    double par_reference_mean = 0.0;
    double par_dsm_mean = 0.0;
    double par_reduction_mean = 0.0;
    double par_reduction_std = 0.0;
    double savings_mean = 0.0;
    double savings_std = 0.0;  // between participants
    Series daily_par_reduction;
    Series participant_savings;  // day-averaged, one entry per participant
    Table residuals_per_day;     // per-sweep solver residuals
};

inline SimulationReport report(const ScenarioConfig& sc, const std::vector<DayRun>& runs) {
    if (runs.empty()) throw std::invalid_argument("report: no day runs");
    const std::vector<std::size_t> participants = participant_indices(sc.households);
    SimulationReport rep;
    rep.days = static_cast<int>(runs.size());
    Series par_ref;
    Series par_dsm;
    for (const DayRun& run : runs) {
        rep.all_converged = rep.all_converged && run.profile.converged;
        par_ref.push_back(run.reference.par);
        par_dsm.push_back(run.result.par);
        rep.daily_par_reduction.push_back(par_reduction(run.result.par, run.reference.par));
        rep.residuals_per_day.push_back(run.profile.sweep_residuals);
    }
    rep.par_reference_mean = mean(par_ref);
    rep.par_dsm_mean = mean(par_dsm);
    rep.par_reduction_mean = mean(rep.daily_par_reduction);
    rep.par_reduction_std = stdev(rep.daily_par_reduction);

    rep.participant_savings.assign(participants.size(), 0.0);
    for (std::size_t i = 0; i < participants.size(); ++i) {
        const std::size_t m = participants[i];
        Series daily;
        for (const DayRun& run : runs) {
            if (run.reference.bills[m] > 0.0) {
                daily.push_back(savings(run.result.bills[m], run.reference.bills[m]));
            }
        }
        rep.participant_savings[i] = mean(daily);
    }
    rep.savings_mean = mean(rep.participant_savings);
    rep.savings_std = stdev(rep.participant_savings);
    return rep;
}

}  // namespace dsmsim
