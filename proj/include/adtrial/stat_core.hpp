#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "adtrial/errors.hpp"
#include "adtrial/types.hpp"

namespace adtrial {

// Standard-normal inverse CDF, Wichura's AS241 (PPND16). Absolute error
// below 1e-15 over the central range, well inside the 1e-9 contract.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("normal_quantile: p must lie strictly in (0,1)");

    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
        r -= 1.6;
        v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -v : v;
}

// Two-proportion sample size: N_total = 2 * ceil((p1 q1 + p2 q2) * (Z_{1-a/2} + Z_{1-b})^2 / (p1 - p2)^2).
// Always even, covers both arms together.
inline int power_sample_size(const IncidencePair& incidence, const ErrorRates& errors) {
    const double p1 = incidence.p1;
    const double p2 = incidence.p2;
    if (p1 == p2)
        throw DegenerateIncidenceError(
            "power_sample_size: p1 == p2, effect size is zero");
    const double z = normal_quantile(1.0 - errors.alpha / 2.0) +
                     normal_quantile(1.0 - errors.beta);
    const double num = (p1 * (1.0 - p1) + p2 * (1.0 - p2)) * z * z;
    const double den = (p1 - p2) * (p1 - p2);
    const double per_arm = std::ceil(num / den);
    // p1=0, p2=1 zeroes the numerator; one participant per arm is the floor
    return std::max(2, 2 * static_cast<int>(per_arm));
}

// Kaplan-Meier estimate for one cohort cell. Event times are offsets from
// stage start; simultaneous events at one timestamp form a single step.
// Participants without events are right-censored at the horizon and never
// decrement survival.
inline KmCurve km_estimate(const std::vector<ParticipantRecord>& records, Millis horizon) {
    if (records.empty())
        throw EmptyCohortError("km_estimate: empty cohort");

    std::vector<Millis> offsets;
    offsets.reserve(records.size());
    for (const auto& rec : records) {
        if (rec.event_at) {
            const Millis off = *rec.event_at - rec.deployed_at;
            if (off > horizon)
                throw DomainError("km_estimate: event beyond horizon");
            offsets.push_back(off);
        }
    }
    std::sort(offsets.begin(), offsets.end());

    KmCurve curve;
    curve.n_initial = static_cast<int>(records.size());
    double survival = 1.0;
    double at_risk = static_cast<double>(records.size());
    for (std::size_t i = 0; i < offsets.size();) {
        const Millis t = offsets[i];
        std::size_t deaths = 0;
        while (i < offsets.size() && offsets[i] == t) {
            ++deaths;
            ++i;
        }
        survival *= (at_risk - static_cast<double>(deaths)) / at_risk;
        at_risk -= static_cast<double>(deaths);
        curve.steps.push_back({t, survival});
    }
    return curve;
}

// Risk rates: cell rate = 1 - final survival; arm marginal = 1 - final
// survival of the arm's participants pooled across regions. Arms with no
// participants anywhere get no marginal entry.
inline RiskRateTable risk_rates(const std::map<CellKey, KmCurve>& curves,
                                const std::vector<ParticipantRecord>& records,
                                Millis horizon) {
    RiskRateTable table;
    for (const auto& [cell, curve] : curves)
        table.cells[cell] = 1.0 - curve.final_survival();

    for (Arm arm : {Arm::control, Arm::corrupted}) {
        std::vector<ParticipantRecord> pooled;
        for (const auto& rec : records)
            if (rec.arm == arm) pooled.push_back(rec);
        if (pooled.empty()) continue;
        table.arm_marginals[arm] = 1.0 - km_estimate(pooled, horizon).final_survival();
    }
    return table;
}

}  // namespace adtrial
