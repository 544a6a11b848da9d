#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsmsim {

// Slack allowed on SOC bounds before a decision counts as infeasible (kWh).
inline constexpr double kSocTolerance = 1e-9;

// Parameters of one lithium-ion home storage unit. Energies in kWh, rates
// in kW, efficiencies dimensionless. Defaults describe a Powerwall-2-class
// battery.
struct BatteryParams {
    double eta_charge = 0.958;
    double eta_discharge = 0.958;
    double eta_inverter = 0.960;
    double charge_rate = 5.0;        // constant-current charging rate, > 0
    double discharge_rate = -7.0;    // < 0
    double self_discharge = -0.001;  // fraction per hour while idle, in (-1, 0)
    double capacity = 13.5;          // nominal maximum SOC
    double soc_min = 0.0;            // discharging is blocked below this SOC
    double cv_threshold = 9.46;      // SOC where charging turns exponential

    void validate() const {
        if (!(eta_charge > 0.0 && eta_charge <= 1.0) ||
            !(eta_discharge > 0.0 && eta_discharge <= 1.0) ||
            !(eta_inverter > 0.0 && eta_inverter <= 1.0)) {
            throw std::invalid_argument("battery: efficiencies must be in (0, 1]");
        }
        if (!(charge_rate > 0.0)) {
            throw std::invalid_argument("battery: charge_rate must be > 0");
        }
        if (!(discharge_rate < 0.0)) {
            throw std::invalid_argument("battery: discharge_rate must be < 0");
        }
        if (!(self_discharge > -1.0 && self_discharge < 0.0)) {
            throw std::invalid_argument("battery: self_discharge must be in (-1, 0)");
        }
        if (!(0.0 <= soc_min && soc_min <= cv_threshold && cv_threshold <= capacity)) {
            throw std::invalid_argument(
                "battery: require 0 <= soc_min <= cv_threshold <= capacity");
        }
    }
};

// Constants of the two-stage charging curve: SOC grows linearly at
// charge_rate until cv_threshold, then approaches capacity exponentially.
// Derived so that the SOC-vs-time curve is continuous with continuous
// slope at the switch point.
struct ChargeCurve {
    double cc_end_time;    // hours to charge an empty battery to cv_threshold
    double time_constant;  // hours, exponential stage
    double amplitude;      // dimensionless prefactor of the exponential stage
};

inline ChargeCurve derive_charge_curve(const BatteryParams& p) {
    p.validate();
    if (p.cv_threshold >= p.capacity) {
        throw std::invalid_argument(
            "battery: no exponential charging stage (cv_threshold >= capacity)");
    }
    ChargeCurve curve{};
    curve.cc_end_time = p.cv_threshold / p.charge_rate;
    curve.time_constant = (p.capacity - p.cv_threshold) / p.charge_rate;
    curve.amplitude = (p.capacity - p.cv_threshold) / p.capacity *
                      std::exp(curve.cc_end_time / curve.time_constant);
    return curve;
}

// Largest admissible charging decision (kWh, grid-side) for one interval
// starting at `soc`. Follows the linear stage, crossing into the
// exponential stage mid-interval when the threshold is reached.
inline double charge_limit(double soc, const BatteryParams& p, const ChargeCurve& curve,
                           double dt_hours) {
    if (soc >= p.capacity) return 0.0;
    if (soc >= p.cv_threshold) {
        return (p.capacity - soc) * (1.0 - std::exp(-dt_hours / curve.time_constant));
    }
    const double time_to_cv = (p.cv_threshold - soc) / p.charge_rate;
    if (dt_hours <= time_to_cv) return p.charge_rate * dt_hours;
    const double cv_part = (p.capacity - p.cv_threshold) *
                           (1.0 - std::exp(-(dt_hours - time_to_cv) / curve.time_constant));
    return (p.cv_threshold - soc) + cv_part;
}

// Most negative admissible discharging decision (kWh, grid-side, <= 0).
// Limited by the discharge rate and by the energy above soc_min; both
// shrink by the inverter and discharging efficiencies.
inline double discharge_limit(double soc, const BatteryParams& p, double dt_hours) {
    const double conversion = p.eta_inverter * p.eta_discharge;
    return std::max(p.discharge_rate * dt_hours * conversion,
                    -(soc - p.soc_min) * conversion);
}

// State transition for one interval: charging gains are reduced by the
// inverter and charging efficiencies, discharging drains more than is
// delivered, and an exactly idle battery decays by self-discharge
// (saturating at soc_min). Throws if the decision would push the SOC
// outside its bounds by more than kSocTolerance.
inline double next_soc(double soc, double decision, const BatteryParams& p, double dt_hours) {
    double out;
    if (decision > 0.0) {
        out = soc + p.eta_inverter * p.eta_charge * decision;
    } else if (decision < 0.0) {
        out = soc + decision / (p.eta_inverter * p.eta_discharge);
    } else {
        return std::max(soc * std::pow(1.0 + p.self_discharge, dt_hours), p.soc_min);
    }
    if (out < p.soc_min - kSocTolerance || out > p.capacity + kSocTolerance) {
        throw std::domain_error("battery: infeasible decision " + std::to_string(decision) +
                                " kWh at soc " + std::to_string(soc) + " kWh");
    }
    return std::clamp(out, p.soc_min, p.capacity);
}

// Projects a raw decision onto the interval that is feasible at `soc`
// against a net demand: one cannot discharge more than is needed, nor
// beyond the battery limits. Idempotent.
inline double clamp_decision(double soc, double raw, double net_demand, const BatteryParams& p,
                             const ChargeCurve& curve, double dt_hours) {
    if (net_demand < 0.0) {
        throw std::invalid_argument("clamp_decision: net demand must be >= 0");
    }
    const double lo = std::max(-net_demand, discharge_limit(soc, p, dt_hours));
    const double hi = charge_limit(soc, p, curve, dt_hours);
    return std::clamp(raw, lo, hi);
}

}  // namespace dsmsim
