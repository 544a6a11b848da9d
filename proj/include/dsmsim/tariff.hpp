#pragma once

#include <stdexcept>

#include "dsmsim/common.hpp"

namespace dsmsim {

// Quadratic per-interval pricing for the neighbourhood plus the flat
// tariff applied to non-participants.
struct TariffParams {
    double c2 = 0.03125;  // currency per kWh^2
    double c1 = 1.0;      // currency per kWh
    double c0 = 0.0;      // currency
    double fixed_price = 0.15;  // currency per kWh for non-participants

    void validate() const {
        if (!(c2 > 0.0)) throw std::invalid_argument("tariff: c2 must be > 0");
        if (c1 < 0.0 || c0 < 0.0) throw std::invalid_argument("tariff: c1, c0 must be >= 0");
        if (!(fixed_price > 0.0)) throw std::invalid_argument("tariff: fixed_price must be > 0");
    }
};

// Cost of serving an aggregate load for one interval.
inline double stage_cost(double aggregate_load, const TariffParams& t) {
    return t.c2 * aggregate_load * aggregate_load + t.c1 * aggregate_load + t.c0;
}

// Each participant's share of total participant consumption over the day.
// Shares sum to one; with no consumption at all the split is uniform.
inline Series proportional_factor(const Table& participant_loads) {
    const std::size_t n = participant_loads.size();
    if (n == 0) return {};
    Series share(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (double l : participant_loads[i]) {
            if (l < 0.0) throw std::invalid_argument("billing: loads must be >= 0");
        }
        share[i] = sum(participant_loads[i]);
        total += share[i];
    }
    if (!(total > 0.0)) return Series(n, 1.0 / static_cast<double>(n));
    for (double& s : share) s /= total;
    return share;
}

struct BillingResult {
    Series bills;       // per participant, currency
    Series omega;       // per participant, proportional factors
    double total_cost;  // sum of per-interval costs of the aggregate load
};

// Splits the total cost of the whole neighbourhood's aggregate load across
// the participants in proportion to their consumption. Bills are reported
// as positive amounts owed.
inline BillingResult bill_participants(const Table& participant_loads,
                                       const Series& total_loads_all_households,
                                       const TariffParams& t) {
    for (const Series& row : participant_loads) {
        if (row.size() != total_loads_all_households.size()) {
            throw std::invalid_argument("billing: inconsistent number of intervals");
        }
    }
    BillingResult r{};
    r.total_cost = 0.0;
    for (double load : total_loads_all_households) r.total_cost += stage_cost(load, t);
    r.omega = proportional_factor(participant_loads);
    r.bills.resize(r.omega.size());
    for (std::size_t i = 0; i < r.omega.size(); ++i) r.bills[i] = r.omega[i] * r.total_cost;
    return r;
}

inline double bill_nonparticipant(const Series& loads, const TariffParams& t) {
    return t.fixed_price * sum(loads);
}

// Relative bill reduction against a reference bill; negative when the
// outcome is worse than the reference.
inline double savings(double bill_with_dsm, double bill_reference) {
    if (!(bill_reference > 0.0)) {
        throw std::domain_error("savings: reference bill must be > 0");
    }
    return (bill_reference - bill_with_dsm) / bill_reference;
}

}  // namespace dsmsim
