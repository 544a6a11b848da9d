#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dsmsim/battery.hpp"
#include "dsmsim/common.hpp"
#include "dsmsim/tariff.hpp"

namespace dsmsim {

// One player of the scheduling game: a forecast net-demand profile, a
// battery, and the state of charge at the start of the horizon.
struct PlayerSpec {
    Series net_demand;  // length T, >= 0
    BatteryParams battery;
    double initial_soc = 0.0;
};

struct GameSpec {
    int stages = 0;
    double dt_hours = 1.0;
    std::vector<PlayerSpec> players;
    Series background_load;  // summed non-participant forecast loads, length T
    TariffParams tariff;

    void validate() const {
        if (stages < 1) throw std::invalid_argument("game: need at least one stage");
        if (!(dt_hours > 0.0)) throw std::invalid_argument("game: dt_hours must be > 0");
        if (background_load.size() != static_cast<std::size_t>(stages)) {
            throw std::invalid_argument("game: background load length mismatch");
        }
        tariff.validate();
        for (const PlayerSpec& p : players) {
            if (p.net_demand.size() != static_cast<std::size_t>(stages)) {
                throw std::invalid_argument("game: player demand length mismatch");
            }
            p.battery.validate();
            if (p.initial_soc < p.battery.soc_min - kSocTolerance ||
                p.initial_soc > p.battery.capacity + kSocTolerance) {
                throw std::invalid_argument("game: initial soc outside battery bounds");
            }
        }
    }
};

// How battery state evolves while computing responses. `Idealized` is the
// bookkeeping used by the closed-form derivation (soc + decision, no
// losses); physical limits are enforced later, when schedules are
// executed. `Clamped` applies the full battery model during solving and
// exists for sensitivity analysis.
enum class TransitionMode { Idealized, Clamped };

struct StrategyProfile {
    Table schedules;         // N x T decisions
    Table soc;               // N x (T+1) induced trajectories
    int iterations = 0;      // sweeps performed
    bool converged = false;
    double residual = 0.0;   // max |schedule change| in the final sweep
    Series sweep_residuals;  // one entry per sweep
};

namespace detail {
inline Series idealized_trajectory(double initial_soc, const Series& schedule) {
    Series soc(schedule.size() + 1);
    soc[0] = initial_soc;
    for (std::size_t t = 0; t < schedule.size(); ++t) soc[t + 1] = soc[t] + schedule[t];
    return soc;
}
}  // namespace detail

// Rebuilds trajectories for externally supplied schedules, e.g. perturbed
// profiles in equilibrium checks. Clamped mode assumes the schedules are
// feasible and throws otherwise.
inline StrategyProfile profile_from_schedules(const GameSpec& spec, Table schedules,
                                              TransitionMode mode = TransitionMode::Idealized) {
    spec.validate();
    if (schedules.size() != spec.players.size()) {
        throw std::invalid_argument("profile_from_schedules: wrong number of players");
    }
    StrategyProfile p;
    p.schedules = std::move(schedules);
    p.soc.resize(spec.players.size());
    for (std::size_t n = 0; n < spec.players.size(); ++n) {
        if (p.schedules[n].size() != static_cast<std::size_t>(spec.stages)) {
            throw std::invalid_argument("profile_from_schedules: wrong schedule length");
        }
        if (mode == TransitionMode::Idealized) {
            p.soc[n] = detail::idealized_trajectory(spec.players[n].initial_soc, p.schedules[n]);
        } else {
            Series soc(spec.stages + 1);
            soc[0] = spec.players[n].initial_soc;
            for (int t = 0; t < spec.stages; ++t) {
                soc[t + 1] = next_soc(soc[t], p.schedules[n][t], spec.players[n].battery,
                                      spec.dt_hours);
            }
            p.soc[n] = std::move(soc);
        }
    }
    return p;
}

// Aggregate load per interval implied by a profile: every player's
// net demand plus decision, plus the non-participant background.
inline Series aggregate_load(const GameSpec& spec, const StrategyProfile& profile) {
    Series total = spec.background_load;
    for (std::size_t n = 0; n < spec.players.size(); ++n) {
        for (int t = 0; t < spec.stages; ++t) {
            total[t] += spec.players[n].net_demand[t] + profile.schedules[n][t];
        }
    }
    return total;
}

// A player's utility: the negated cost of the aggregate load over the day
// minus a terminal penalty equal to the energy left in the battery.
// Higher is better.
inline double utility(const GameSpec& spec, std::size_t n, const StrategyProfile& profile) {
    const Series total = aggregate_load(spec, profile);
    double costs = 0.0;
    for (double l : total) costs += stage_cost(l, spec.tariff);
    return -profile.soc.at(n).back() - costs;
}

// Closed-form single-stage best response for a player holding everybody
// else fixed: the decision that levels the player's remaining cost across
// the rest of the horizon, with the final stage emptying the battery.
inline double best_response_stage(int t, double soc_t, const Series& net_demand,
                                  const Series& others_load, int stages) {
    if (t < 0 || t >= stages) throw std::invalid_argument("best_response_stage: bad stage");
    double future = 0.0;
    for (int tau = t + 1; tau < stages; ++tau) future += net_demand[tau] + others_load[tau];
    const double horizon = static_cast<double>(stages - t);
    const double now = net_demand[t] + others_load[t];
    return (future - soc_t - (horizon - 1.0) * now) / horizon;
}

struct Response {
    Series schedule;  // length T
    Series soc;       // length T+1
};

// Rolls the stage-wise closed form forward through the horizon.
// `others_load` is the summed load of everybody else (including the
// non-participant background) and stays fixed during the computation.
inline Response best_response_schedule(const GameSpec& spec, std::size_t n,
                                       const Series& others_load,
                                       TransitionMode mode = TransitionMode::Idealized) {
    const PlayerSpec& player = spec.players.at(n);
    const int T = spec.stages;
    if (others_load.size() != static_cast<std::size_t>(T)) {
        throw std::invalid_argument("best_response_schedule: others_load length mismatch");
    }
    // suffix[t] = sum over tau >= t of (net demand + others' load)
    Series suffix(T + 1, 0.0);
    for (int t = T - 1; t >= 0; --t) {
        suffix[t] = suffix[t + 1] + player.net_demand[t] + others_load[t];
    }
    std::optional<ChargeCurve> curve;
    if (mode == TransitionMode::Clamped) curve = derive_charge_curve(player.battery);
    Response r;
    r.schedule.resize(T);
    r.soc.resize(T + 1);
    r.soc[0] = player.initial_soc;
    for (int t = 0; t < T; ++t) {
        const double horizon = static_cast<double>(T - t);
        const double now = player.net_demand[t] + others_load[t];
        double a = (suffix[t + 1] - r.soc[t] - (horizon - 1.0) * now) / horizon;
        if (mode == TransitionMode::Clamped) {
            a = clamp_decision(r.soc[t], a, player.net_demand[t], player.battery, *curve,
                               spec.dt_hours);
            r.soc[t + 1] = next_soc(r.soc[t], a, player.battery, spec.dt_hours);
        } else {
            r.soc[t + 1] = r.soc[t] + a;
        }
        r.schedule[t] = a;
    }
    return r;
}

// --- dynamic-programming oracle ---------------------------------------------

struct SocGrid {
    double resolution = 0.01;     // kWh between SOC nodes
    int actions_per_state = 2001;  // candidate decisions per state and stage
};

namespace detail {

struct ValueTable {
    double lo = 0.0;
    double step = 1.0;
    Series values;

    double at(double soc) const {
        const double hi = lo + step * static_cast<double>(values.size() - 1);
        const double s = std::clamp(soc, lo, hi);
        const double pos = (s - lo) / step;
        std::size_t i = static_cast<std::size_t>(pos);
        if (i >= values.size() - 1) return values.back();
        const double frac = pos - static_cast<double>(i);
        return values[i] * (1.0 - frac) + values[i + 1] * frac;
    }
};

}  // namespace detail

// Backward value iteration over a discretized SOC range, minimising the
// player's cost-to-go (interval costs plus the terminal penalty), then a
// forward pass that extracts the cheapest decision at the realised state.
// Serves as the brute-force counterpart of the closed-form response; it
// shares nothing with that derivation beyond the model itself.
inline Series dp_best_response(const GameSpec& spec, std::size_t n, const Series& others_load,
                               const SocGrid& grid,
                               TransitionMode mode = TransitionMode::Idealized) {
    const PlayerSpec& player = spec.players.at(n);
    const BatteryParams& bat = player.battery;
    const int T = spec.stages;
    if (others_load.size() != static_cast<std::size_t>(T)) {
        throw std::invalid_argument("dp_best_response: others_load length mismatch");
    }
    if (!(grid.resolution > 0.0)) {
        throw std::invalid_argument("dp_best_response: grid resolution must be > 0");
    }
    const double range = bat.capacity - bat.soc_min;
    if (range < grid.resolution) {
        throw std::invalid_argument("dp_best_response: grid resolution exceeds the SOC range");
    }
    const int nodes = static_cast<int>(std::lround(range / grid.resolution)) + 1;
    const double step = range / static_cast<double>(nodes - 1);
    const int actions = std::max(grid.actions_per_state, 2);

    std::optional<ChargeCurve> curve;
    if (mode == TransitionMode::Clamped) curve = derive_charge_curve(bat);

    const auto bounds = [&](double soc, int t) -> std::pair<double, double> {
        if (mode == TransitionMode::Idealized) {
            return {bat.soc_min - soc, bat.capacity - soc};
        }
        return {std::max(-player.net_demand[t], discharge_limit(soc, bat, spec.dt_hours)),
                charge_limit(soc, bat, *curve, spec.dt_hours)};
    };
    const auto advance = [&](double soc, double a) -> double {
        if (mode == TransitionMode::Idealized) return soc + a;
        return next_soc(soc, a, bat, spec.dt_hours);
    };

    // cost_to_go[t] covers stages t..T-1 plus the terminal penalty.
    std::vector<detail::ValueTable> cost_to_go(T + 1);
    for (int t = 0; t <= T; ++t) {
        cost_to_go[t].lo = bat.soc_min;
        cost_to_go[t].step = step;
        cost_to_go[t].values.resize(nodes);
    }
    for (int i = 0; i < nodes; ++i) {
        cost_to_go[T].values[i] = bat.soc_min + step * static_cast<double>(i);
    }

    const auto cheapest = [&](double soc, int t) -> std::pair<double, double> {
        const auto [lo, hi] = bounds(soc, t);
        const double width = hi - lo;
        double best_cost = std::numeric_limits<double>::infinity();
        double best_action = lo;
        for (int j = 0; j < actions; ++j) {
            const double a = lo + width * static_cast<double>(j) / static_cast<double>(actions - 1);
            const double cost = stage_cost(player.net_demand[t] + a + others_load[t], spec.tariff) +
                                cost_to_go[t + 1].at(advance(soc, a));
            if (cost < best_cost) {
                best_cost = cost;
                best_action = a;
            }
        }
        return {best_action, best_cost};
    };

    for (int t = T - 1; t >= 0; --t) {
        for (int i = 0; i < nodes; ++i) {
            const double soc = bat.soc_min + step * static_cast<double>(i);
            cost_to_go[t].values[i] = cheapest(soc, t).second;
        }
    }

    Series schedule(T);
    double soc = player.initial_soc;
    for (int t = 0; t < T; ++t) {
        schedule[t] = cheapest(soc, t).first;
        soc = advance(soc, schedule[t]);
    }
    return schedule;
}

// --- equilibrium solver -------------------------------------------------------

struct SolveOptions {
    double tolerance = 1e-9;  // max schedule change per sweep, kWh
    int max_sweeps = 1000;
    enum class Init { Zeros, Random } init = Init::Zeros;
    std::uint64_t seed = 0;   // used by random initialisation
    TransitionMode mode = TransitionMode::Idealized;
};

// Sequential best-response sweeps in player order, stopping once a whole
// sweep no longer changes any decision by more than the tolerance.
// Non-convergence is reported through the flag, not an error.
inline StrategyProfile solve_nash(const GameSpec& spec, const SolveOptions& opt = {}) {
    spec.validate();
    if (!(opt.tolerance > 0.0)) throw std::invalid_argument("solve_nash: tolerance must be > 0");
    if (opt.max_sweeps < 1) throw std::invalid_argument("solve_nash: max_sweeps must be >= 1");
    const int T = spec.stages;
    const std::size_t N = spec.players.size();

    StrategyProfile profile;
    profile.schedules.assign(N, Series(T, 0.0));
    if (opt.init == SolveOptions::Init::Random) {
        std::mt19937_64 rng(splitmix64(opt.seed));
        for (std::size_t n = 0; n < N; ++n) {
            const PlayerSpec& player = spec.players[n];
            for (int t = 0; t < T; ++t) {
                const double lo = -player.net_demand[t];
                const double hi = player.battery.charge_rate * spec.dt_hours;
                profile.schedules[n][t] = lo + (hi - lo) * uniform01(rng);
            }
        }
    }
    profile.soc.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        profile.soc[n] =
            detail::idealized_trajectory(spec.players[n].initial_soc, profile.schedules[n]);
    }
    if (N == 0) {
        profile.converged = true;
        return profile;
    }

    Series total = spec.background_load;
    for (std::size_t n = 0; n < N; ++n) {
        for (int t = 0; t < T; ++t) {
            total[t] += spec.players[n].net_demand[t] + profile.schedules[n][t];
        }
    }

    Series others(T);
    for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        double delta = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const PlayerSpec& player = spec.players[n];
            for (int t = 0; t < T; ++t) {
                others[t] = total[t] - (player.net_demand[t] + profile.schedules[n][t]);
            }
            Response r = best_response_schedule(spec, n, others, opt.mode);
            for (int t = 0; t < T; ++t) {
                delta = std::max(delta, std::abs(r.schedule[t] - profile.schedules[n][t]));
                total[t] += r.schedule[t] - profile.schedules[n][t];
            }
            profile.schedules[n] = std::move(r.schedule);
            profile.soc[n] = std::move(r.soc);
        }
        profile.sweep_residuals.push_back(delta);
        profile.iterations = sweep;
        if (delta <= opt.tolerance) {
            profile.converged = true;
            break;
        }
    }
    profile.residual = profile.sweep_residuals.back();
    return profile;
}

// Largest utility gain any single player could get by recomputing a best
// response while everybody else stays put. A true equilibrium yields a
// value at numerical noise level.
inline double verify_equilibrium(const GameSpec& spec, const StrategyProfile& profile,
                                 TransitionMode mode = TransitionMode::Idealized) {
    spec.validate();
    const int T = spec.stages;
    const std::size_t N = spec.players.size();
    if (N == 0) return 0.0;
    Series total = aggregate_load(spec, profile);
    Series others(T);
    double worst = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const PlayerSpec& player = spec.players[n];
        for (int t = 0; t < T; ++t) {
            others[t] = total[t] - (player.net_demand[t] + profile.schedules[n][t]);
        }
        Response r = best_response_schedule(spec, n, others, mode);
        StrategyProfile candidate = profile;
        candidate.schedules[n] = std::move(r.schedule);
        candidate.soc[n] = std::move(r.soc);
        const double gain = utility(spec, n, candidate) - utility(spec, n, profile);
        worst = std::max(worst, gain);
    }
    return worst;
}

// Truncates a solved game to its tail starting at `start_stage` (initial
// states taken from the profile's trajectories) and measures how far the
// truncated profile is from an equilibrium of that subgame.
inline double subgame_improvement(const GameSpec& spec, const StrategyProfile& profile,
                                  int start_stage,
                                  TransitionMode mode = TransitionMode::Idealized) {
    spec.validate();
    if (start_stage < 0 || start_stage >= spec.stages) {
        throw std::invalid_argument("subgame_improvement: bad start stage");
    }
    const int tail = spec.stages - start_stage;
    GameSpec sub;
    sub.stages = tail;
    sub.dt_hours = spec.dt_hours;
    sub.tariff = spec.tariff;
    sub.background_load.assign(spec.background_load.begin() + start_stage,
                               spec.background_load.end());
    sub.players.resize(spec.players.size());
    StrategyProfile sub_profile;
    sub_profile.schedules.resize(spec.players.size());
    sub_profile.soc.resize(spec.players.size());
    sub_profile.converged = profile.converged;
    for (std::size_t n = 0; n < spec.players.size(); ++n) {
        const PlayerSpec& player = spec.players[n];
        sub.players[n].battery = player.battery;
        sub.players[n].initial_soc = profile.soc[n][start_stage];
        sub.players[n].net_demand.assign(player.net_demand.begin() + start_stage,
                                         player.net_demand.end());
        sub_profile.schedules[n].assign(profile.schedules[n].begin() + start_stage,
                                        profile.schedules[n].end());
        sub_profile.soc[n].assign(profile.soc[n].begin() + start_stage, profile.soc[n].end());
    }
    return verify_equilibrium(sub, sub_profile, mode);
}

}  // namespace dsmsim
