#include "bessplace/vsi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bessplace/errors.hpp"
#include "bessplace/parallel.hpp"

namespace bessplace {

int ViolationMask::total() const {
    return std::accumulate(per_bus_counts.begin(), per_bus_counts.end(), 0);
}

double voltage_variation(double v_t, double v0) {
    if (v0 <= 0.0) fail_validation("voltage variation needs a positive baseline voltage");
    return std::abs(v_t - v0) / v0;
}

ViolationMask check_criteria(const Trajectory& traj, const Eigen::VectorXd& v0,
                             const CriteriaConfig& cfg, const NetworkCase& c, double t_clear) {
    const int t_steps = traj.steps();
    const int n = static_cast<int>(traj.v_mag.cols());
    if (v0.size() != n || c.n_buses() != n)
        fail_structural("criteria check: trajectory, baseline and case sizes disagree");

    ViolationMask mask;
    mask.t_steps = t_steps;
    mask.n_buses = n;
    mask.violated.assign(static_cast<size_t>(t_steps) * n, 0);
    mask.per_bus_counts.assign(n, 0);

    int t0 = 0;
    while (t0 < t_steps && traj.times[t0] < t_clear) ++t0;

    const double t_end = traj.times.back();
    const double window_start = std::max(t_clear, t_end - cfg.post_transient_window);
    int tw = t0;
    while (tw < t_steps && traj.times[tw] < window_start) ++tw;

    const double max_overshoot_s = cfg.overshoot_duration_limit / c.nominal_hz;

    for (int j = 0; j < n; ++j) {
        const bool gen_bus = c.buses[j].is_generator_bus;
        const double inst_limit = gen_bus ? cfg.dip_limit_gen : cfg.dip_limit_load;

        // rule 1: instantaneous dip/overshoot
        for (int t = t0; t < t_steps; ++t) {
            if (voltage_variation(traj.v_mag(t, j), v0[j]) > inst_limit) mask.set(t, j);
        }

        // rule 1b: sustained >=20% overshoot, load buses only
        if (!gen_bus) {
            int run_start = -1;
            for (int t = t0; t <= t_steps; ++t) {
                const bool over = t < t_steps &&
                                  (traj.v_mag(t, j) - v0[j]) / v0[j] >= cfg.overshoot_duration_threshold;
                if (over && run_start < 0) run_start = t;
                if (!over && run_start >= 0) {
                    if (traj.times[t - 1] - traj.times[run_start] > max_overshoot_s)
                        for (int s = run_start; s < t; ++s) mask.set(s, j);
                    run_start = -1;
                }
            }
        }

        // rule 2: post-transient deviation over the tail window
        if (tw < t_steps) {
            double acc = 0.0;
            for (int t = tw; t < t_steps; ++t) acc += voltage_variation(traj.v_mag(t, j), v0[j]);
            if (acc / (t_steps - tw) > cfg.post_transient_deviation)
                for (int t = tw; t < t_steps; ++t) mask.set(t, j);
        }
    }
    return mask;
}

double severity_index(const Trajectory& traj, const Eigen::VectorXd& v0,
                      const ViolationMask& mask) {
    const int t_steps = traj.steps();
    const int n = static_cast<int>(traj.v_mag.cols());
    if (mask.t_steps != t_steps || mask.n_buses != n)
        fail_structural("severity index: mask does not match trajectory");

    double total = 0.0;
    for (int t = 0; t < t_steps; ++t)
        for (int j = 0; j < n; ++j)
            if (mask.at(t, j)) total += voltage_variation(traj.v_mag(t, j), v0[j]);
    return total / (static_cast<double>(t_steps) * n);
}

std::vector<ContingencyResult> rank_contingencies(const NetworkCase& c,
                                                  const std::vector<Contingency>& scenarios,
                                                  const CriteriaConfig& crit,
                                                  const SimConfig& sim_cfg, int workers) {
    const PowerFlowSolution pf = solve_power_flow(c);
    std::vector<ContingencyResult> results(scenarios.size());

    parallel_for(static_cast<int>(scenarios.size()), workers, [&](int k) {
        ContingencyResult r;
        r.contingency = scenarios[k];
        r.baseline = simulate(c, {}, scenarios[k], sim_cfg, &pf);
        const Eigen::VectorXd v0 = r.baseline.v_mag.row(0);
        const ViolationMask mask =
            check_criteria(r.baseline, v0, crit, c, scenarios[k].t_clear);
        r.si = severity_index(r.baseline, v0, mask);
        results[k] = std::move(r);
    });

    std::stable_sort(results.begin(), results.end(),
                     [](const ContingencyResult& a, const ContingencyResult& b) {
                         if (a.si != b.si) return a.si > b.si;
                         return a.contingency.fault_bus < b.contingency.fault_bus;
                     });
    return results;
}

double vsi_sensitivity(const Trajectory& new_traj, const Trajectory& old_traj, int bus_idx,
                       double total_gain) {
    if (total_gain <= 0.0) fail_validation("vsi sensitivity needs a positive total gain");
    if (new_traj.steps() != old_traj.steps() || new_traj.v_mag.cols() != old_traj.v_mag.cols())
        fail_structural("vsi sensitivity: trajectories are not aligned");

    double peak = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < new_traj.steps(); ++t)
        peak = std::max(peak, new_traj.v_mag(t, bus_idx) - old_traj.v_mag(t, bus_idx));
    return peak / total_gain;
}

double vsi_placement(const std::vector<Trajectory>& new_trajs,
                     const std::vector<ContingencyResult>& top_k, double total_gain) {
    if (top_k.empty()) fail_validation("vsi placement needs at least one ranked contingency");
    if (new_trajs.size() != top_k.size())
        fail_structural("vsi placement: one new trajectory per ranked contingency required");

    double value = 0.0;
    for (size_t k = 0; k < top_k.size(); ++k) {
        const Trajectory& nt = new_trajs[k];
        const Trajectory& ot = top_k[k].baseline;
        const int n = static_cast<int>(ot.v_mag.cols());
        double avg = 0.0;
        for (int j = 0; j < n; ++j) avg += vsi_sensitivity(nt, ot, j, total_gain);
        avg /= n;
        value += top_k[k].si * avg;
    }
    return value;
}

}  // namespace bessplace
