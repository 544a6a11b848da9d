#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsmsim/battery.hpp"
#include "dsmsim/common.hpp"
#include "dsmsim/csv.hpp"

namespace dsmsim {

enum class Category { Low, Base, High };

inline const char* category_name(Category c) {
    switch (c) {
        case Category::Low: return "low";
        case Category::Base: return "base";
        default: return "high";
    }
}

struct Household {
    int id = 0;
    bool participant = false;
    Category category = Category::Base;
    Series demand;        // one scheduling day; may be empty when traces are
                          // supplied separately
    double pv_scale = 0.0;
    std::optional<BatteryParams> battery;

    void validate() const {
        if (participant != battery.has_value()) {
            throw std::invalid_argument(
                "household: participants and only participants carry a battery");
        }
        if (!participant && pv_scale != 0.0) {
            throw std::invalid_argument("household: non-participants have no PV");
        }
        if (pv_scale < 0.0) throw std::invalid_argument("household: pv_scale must be >= 0");
        for (double d : demand) {
            if (d < 0.0) throw std::invalid_argument("household: demand must be >= 0");
        }
        if (battery) battery->validate();
    }
};

// One scheduling day of the whole neighbourhood. Demand is per household
// and interval; PV is the shared unscaled production profile (each
// household sees pv_scale times these values).
struct DayTraces {
    Table actual_demand;    // M x T
    Series actual_pv;       // T
    Table forecast_demand;  // M x T, filled by apply_worst_case_error
    Series forecast_pv;     // T
};

// Deterministic multiplicative worst-case forecast errors: demand is
// under-forecast and PV over-forecast by the same relative amounts for
// every household. `magnitude` scales both errors towards zero.
struct ForecastErrorSpec {
    double demand_error = 0.08;  // fraction of actual demand
    double pv_error = 0.10;      // fraction of actual PV output
    double magnitude = 1.0;      // 0 = perfect forecast, 1 = full worst case

    void validate() const {
        if (!(demand_error >= 0.0 && demand_error < 1.0) ||
            !(pv_error >= 0.0 && pv_error < 1.0)) {
            throw std::invalid_argument("forecast error fractions must be in [0, 1)");
        }
        if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
            throw std::invalid_argument("forecast error magnitude must be in [0, 1]");
        }
    }
};

struct NetDemand {
    double net;        // energy still needed from grid or battery, >= 0
    double excess_pv;  // DC-side PV surplus beyond the demand, >= 0
};

// Demand net of inverter-efficient PV production. At most one of the two
// outputs is positive.
inline NetDemand net_demand(double demand, double pv, double eta_inverter) {
    if (demand < 0.0 || pv < 0.0) {
        throw std::invalid_argument("net_demand: demand and pv must be >= 0");
    }
    NetDemand out{};
    out.net = std::max(0.0, demand - eta_inverter * pv);
    out.excess_pv = std::max(0.0, pv - demand / eta_inverter);
    return out;
}

inline DayTraces apply_worst_case_error(DayTraces traces, const ForecastErrorSpec& spec) {
    spec.validate();
    const double demand_factor = 1.0 - spec.magnitude * spec.demand_error;
    const double pv_factor = 1.0 + spec.magnitude * spec.pv_error;
    traces.forecast_demand = traces.actual_demand;
    for (Series& row : traces.forecast_demand) {
        for (double& d : row) d *= demand_factor;
    }
    traces.forecast_pv = traces.actual_pv;
    for (double& w : traces.forecast_pv) w *= pv_factor;
    return traces;
}

// Energy drawn from the grid in one interval. The decision must already be
// clamped; a negative result signals a scheduling bug upstream.
inline double load(double net_demand_kwh, double decision) {
    const double l = net_demand_kwh + decision;
    if (l < -kSocTolerance) {
        throw std::logic_error("load: decision discharges more than the net demand");
    }
    return std::max(0.0, l);
}

inline double total_load(const Series& loads) { return sum(loads); }

// Sum of every load except household n's, so that
// total_load == loads[n] + others_load_sum(loads, n).
inline double others_load_sum(const Series& loads, std::size_t n) {
    return total_load(loads) - loads.at(n);
}

// Average counterpart, exposed for reporting only.
inline double others_load_average(const Series& loads, std::size_t n) {
    if (loads.size() < 2) return 0.0;
    return others_load_sum(loads, n) / static_cast<double>(loads.size() - 1);
}

// --- dataset ingestion ----------------------------------------------------

// Demand files carry one column per household (header household_0 ...) and
// one row per interval; PV files carry a single pv_kwh column. Empty PV
// cells are treated as sensor dropouts and read as 0.
inline std::vector<DayTraces> load_csv_traces(const std::string& demand_path,
                                              const std::string& pv_path,
                                              int intervals_per_day) {
    if (intervals_per_day < 1) {
        throw std::invalid_argument("intervals_per_day must be >= 1");
    }
    csvio::NumericCsv demand = csvio::read_numeric(demand_path);
    const std::size_t households = demand.header.size();
    for (std::size_t c = 0; c < households; ++c) {
        if (demand.header[c] != "household_" + std::to_string(c)) {
            throw DataError(demand_path + ": expected header column 'household_" +
                            std::to_string(c) + "', found '" + demand.header[c] + "'");
        }
    }
    const std::size_t T = static_cast<std::size_t>(intervals_per_day);
    if (demand.rows.empty() || demand.rows.size() % T != 0) {
        throw DataError(demand_path + ": " + std::to_string(demand.rows.size()) +
                        " rows is not a whole number of " + std::to_string(T) +
                        "-interval days");
    }
    for (std::size_t r = 0; r < demand.rows.size(); ++r) {
        for (double v : demand.rows[r]) {
            if (v < 0.0) {
                throw DataError(demand_path + ":" + std::to_string(r + 2) +
                                ": negative demand value");
            }
        }
    }

    csvio::RawCsv pv = csvio::read_raw(pv_path);
    if (pv.header.size() != 1 || pv.header[0] != "pv_kwh") {
        throw DataError(pv_path + ": expected a single 'pv_kwh' column");
    }
    if (pv.cells.size() != demand.rows.size()) {
        throw DataError(pv_path + ": " + std::to_string(pv.cells.size()) +
                        " rows, but demand file has " + std::to_string(demand.rows.size()));
    }
    Series pv_values(pv.cells.size());
    for (std::size_t r = 0; r < pv.cells.size(); ++r) {
        const std::string& cell = pv.cells[r].at(0);
        pv_values[r] = cell.empty() ? 0.0 : csvio::parse_number(cell, pv_path, r + 2, 0);
        if (pv_values[r] < 0.0) {
            throw DataError(pv_path + ":" + std::to_string(r + 2) + ": negative pv value");
        }
    }

    const std::size_t days = demand.rows.size() / T;
    std::vector<DayTraces> out(days);
    for (std::size_t day = 0; day < days; ++day) {
        DayTraces& tr = out[day];
        tr.actual_demand.assign(households, Series(T, 0.0));
        tr.actual_pv.assign(T, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            const Series& row = demand.rows[day * T + t];
            for (std::size_t m = 0; m < households; ++m) tr.actual_demand[m][t] = row[m];
            tr.actual_pv[t] = pv_values[day * T + t];
        }
    }
    return out;
}

inline void write_csv_traces(const std::string& demand_path, const std::string& pv_path,
                             const std::vector<DayTraces>& days) {
    if (days.empty()) throw std::invalid_argument("write_csv_traces: no days");
    const std::size_t households = days[0].actual_demand.size();
    const std::size_t T = days[0].actual_pv.size();
    std::vector<std::string> demand_header(households);
    for (std::size_t m = 0; m < households; ++m) {
        demand_header[m] = "household_" + std::to_string(m);
    }
    Table demand_rows;
    Table pv_rows;
    for (const DayTraces& tr : days) {
        for (std::size_t t = 0; t < T; ++t) {
            Series row(households);
            for (std::size_t m = 0; m < households; ++m) row[m] = tr.actual_demand[m][t];
            demand_rows.push_back(std::move(row));
            pv_rows.push_back({tr.actual_pv[t]});
        }
    }
    csvio::write_numeric(demand_path, demand_header, demand_rows);
    csvio::write_numeric(pv_path, {"pv_kwh"}, pv_rows);
}

// --- synthetic traces -------------------------------------------------------

struct CategoryMix {
    int low = 7;
    int base = 9;
    int high = 9;

    int total() const { return low + base + high; }
};

// Households are laid out as a block of LOW consumers, then BASE, then HIGH.
inline Category category_of(int index, const CategoryMix& mix) {
    if (index < mix.low) return Category::Low;
    if (index < mix.low + mix.base) return Category::Base;
    return Category::High;
}

inline double category_demand_scale(Category c) {
    switch (c) {
        case Category::Low: return 0.6;
        case Category::Base: return 1.0;
        default: return 1.5;
    }
}

namespace detail {
inline double bump(double x, double centre, double width) {
    const double z = (x - centre) / width;
    return std::exp(-z * z);
}
}  // namespace detail

// Deterministic pseudo-random day: household demand with a morning and an
// evening peak scaled by consumer category, and a bell-shaped midday PV
// profile with a day-specific weather factor.
inline DayTraces synth_traces(std::uint64_t seed, int households, int intervals,
                              const CategoryMix& mix) {
    if (households < 1) throw std::invalid_argument("synth_traces: need at least 1 household");
    if (intervals < 2) throw std::invalid_argument("synth_traces: need at least 2 intervals");
    if (mix.low < 0 || mix.base < 0 || mix.high < 0 || mix.total() != households) {
        throw std::invalid_argument("synth_traces: category mix must sum to the household count");
    }
    std::mt19937_64 rng(splitmix64(seed));
    const double hours = 24.0 / intervals;
    DayTraces tr;
    tr.actual_demand.assign(households, Series(intervals, 0.0));
    tr.actual_pv.assign(intervals, 0.0);
    for (int m = 0; m < households; ++m) {
        const double scale = category_demand_scale(category_of(m, mix));
        const double phase = (uniform01(rng) - 0.5) * 1.6;  // hours
        const double level = 0.85 + 0.3 * uniform01(rng);
        for (int t = 0; t < intervals; ++t) {
            const double tau = (t + 0.5) * hours;
            const double shape = 0.18 + 0.85 * detail::bump(tau - phase, 7.3, 1.6) +
                                 1.0 * detail::bump(tau - phase, 19.0, 2.2);
            const double noise = 1.0 + 0.3 * (uniform01(rng) - 0.5);
            tr.actual_demand[m][t] = scale * level * shape * noise * hours;
        }
    }
    const double weather = 0.35 + 0.65 * uniform01(rng);
    for (int t = 0; t < intervals; ++t) {
        const double tau = (t + 0.5) * hours;
        double w = 3.7 * weather * detail::bump(tau, 12.75, 2.9) * hours;
        if (w < 1e-3) w = 0.0;  // night values collapse to clean zeros
        tr.actual_pv[t] = w;
    }
    return tr;
}

}  // namespace dsmsim
