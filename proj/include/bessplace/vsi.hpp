#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bessplace/dynsim.hpp"
#include "bessplace/netcase.hpp"

namespace bessplace {

struct CriteriaConfig {
    double dip_limit_load = 0.25;    // instantaneous dip/overshoot limit, load buses
    double dip_limit_gen = 0.30;     // same, generator buses
    double overshoot_duration_limit = 20.0;     // cycles
    double overshoot_duration_threshold = 0.20;  // overshoot level that starts the clock
    double post_transient_deviation = 0.05;
    double post_transient_window = 1.0;  // seconds at the trajectory tail
};

struct ViolationMask {
    // row-major T x N, 1 = violated sample; aligned with the source trajectory
    std::vector<uint8_t> violated;
    int t_steps = 0;
    int n_buses = 0;
    std::vector<int> per_bus_counts;

    bool at(int t, int j) const { return violated[static_cast<size_t>(t) * n_buses + j] != 0; }
    void set(int t, int j) {
        auto& cell = violated[static_cast<size_t>(t) * n_buses + j];
        if (!cell) {
            cell = 1;
            ++per_bus_counts[j];
        }
    }
    int total() const;
};

struct ContingencyResult {
    Contingency contingency;
    double si = 0.0;
    Trajectory baseline;  // no-BESS run
};

// |v_t - v0| / v0
double voltage_variation(double v_t, double v0);

// Grid-code screening over one trajectory. Only samples at or after fault
// clearing are evaluated; the rules are instantaneous dip/overshoot
// (25% load / 30% generator), sustained >=20% overshoot longer than 20 cycles
// at load buses, and >5% deviation across the post-transient window.
ViolationMask check_criteria(const Trajectory& traj, const Eigen::VectorXd& v0,
                             const CriteriaConfig& cfg, const NetworkCase& c,
                             double t_clear = 0.0);

// Eq-style severity: mean of the violating voltage deviations over all T*N samples.
double severity_index(const Trajectory& traj, const Eigen::VectorXd& v0,
                      const ViolationMask& mask);

// No-BESS severity sweep; descending SI, ties broken by ascending fault bus.
std::vector<ContingencyResult> rank_contingencies(const NetworkCase& c,
                                                  const std::vector<Contingency>& scenarios,
                                                  const CriteriaConfig& crit,
                                                  const SimConfig& sim_cfg, int workers = 1);

// Peak voltage-recovery gain at one bus divided by the total placed controller gain.
double vsi_sensitivity(const Trajectory& new_traj, const Trajectory& old_traj, int bus_idx,
                       double total_gain);

// Severity-weighted placement score over the top-K contingencies.
double vsi_placement(const std::vector<Trajectory>& new_trajs,
                     const std::vector<ContingencyResult>& top_k, double total_gain);

}  // namespace bessplace
