#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adtrial/errors.hpp"
#include "adtrial/types.hpp"

namespace adtrial {

namespace detail {

// Hamilton / largest-remainder apportionment. Zero-weight entries are
// never given a remainder seat. Remainders are compared on a 1e-9 grid so
// that a common positive scaling of the weights cannot flip a tie; ties
// break by index order.
inline std::vector<int> largest_remainder(const std::vector<double>& ideals, int n_total) {
    const std::size_t n = ideals.size();
    std::vector<int> counts(n, 0);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        counts[i] = static_cast<int>(std::floor(ideals[i]));
        assigned += counts[i];
    }
    int leftover = n_total - assigned;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i)
        if (ideals[i] > 0.0) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto key = [&](std::size_t i) {
            return std::llround((ideals[i] - std::floor(ideals[i])) * 1e9);
        };
        return key(a) > key(b);
    });
    for (std::size_t k = 0; leftover > 0 && k < order.size(); ++k, --leftover)
        ++counts[order[k]];
    return counts;
}

}  // namespace detail

// Split a single arm's total across regions, largest remainder, region
// order as tie-break.
inline std::vector<int> split_arm_across_regions(int arm_total, std::size_t n_regions) {
    std::vector<double> ideals(n_regions,
                               static_cast<double>(arm_total) / static_cast<double>(n_regions));
    return detail::largest_remainder(ideals, arm_total);
}

// Equal split for RCT and AD stage 1: n_total/2 per arm, then per-arm
// region split.
inline AllocationPlan equal_split(int n_total, const std::vector<std::string>& regions) {
    if (n_total <= 0 || n_total % 2 != 0)
        throw DomainError("equal_split: n_total must be positive and even");
    if (regions.empty())
        throw DomainError("equal_split: regions must be nonempty");

    AllocationPlan plan;
    plan.n_total = n_total;
    for (Arm arm : {Arm::control, Arm::corrupted}) {
        const auto counts = split_arm_across_regions(n_total / 2, regions.size());
        for (std::size_t i = 0; i < regions.size(); ++i)
            plan.counts[{regions[i], arm}] = counts[i];
    }
    return plan;
}

// Pre-rounding shares: n_total * rate / sum(rates). Monotone in each
// cell's own rate; the rounded counts are not (apportionment paradoxes).
inline std::map<CellKey, double> ideal_shares(int n_total, const RiskRateTable& rates) {
    double total_rate = 0.0;
    for (const auto& [cell, rate] : rates.cells) total_rate += rate;
    if (total_rate <= 0.0)
        throw AllZeroRatesError("ideal_shares: all cell risk rates are zero");
    std::map<CellKey, double> shares;
    for (const auto& [cell, rate] : rates.cells)
        shares[cell] = static_cast<double>(n_total) * (rate / total_rate);
    return shares;
}

// Risk-rate-weighted split. Cells are ordered region-major (given region
// order, control before corrupted) so remainder ties resolve the same way
// as equal_split. Cells with zero rate receive exactly 0.
inline AllocationPlan weighted_split(int n_total, const RiskRateTable& rates,
                                     const std::vector<std::string>& regions) {
    if (n_total <= 0)
        throw DomainError("weighted_split: n_total must be positive");

    std::vector<CellKey> cells;
    std::vector<double> weights;
    double total_rate = 0.0;
    for (const auto& region : regions) {
        for (Arm arm : {Arm::control, Arm::corrupted}) {
            const CellKey cell{region, arm};
            const auto it = rates.cells.find(cell);
            const double rate = it == rates.cells.end() ? 0.0 : it->second;
            cells.push_back(cell);
            weights.push_back(rate);
            total_rate += rate;
        }
    }
    if (total_rate <= 0.0)
        throw AllZeroRatesError("weighted_split: all cell risk rates are zero");

    std::vector<double> ideals(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        ideals[i] = static_cast<double>(n_total) * (weights[i] / total_rate);

    const auto counts = detail::largest_remainder(ideals, n_total);
    AllocationPlan plan;
    plan.n_total = n_total;
    for (std::size_t i = 0; i < cells.size(); ++i)
        plan.counts[cells[i]] = counts[i];
    return plan;
}

}  // namespace adtrial
