#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bessplace/bess.hpp"
#include "bessplace/netcase.hpp"
#include "bessplace/powerflow.hpp"

namespace bessplace {

struct GeneratorState {
    double delta = 0.0;  // rotor angle, rad
    double omega = 0.0;  // speed deviation, pu
    double eq_p = 0.0;   // q-axis transient EMF, pu
    double ed_p = 0.0;   // d-axis transient EMF, pu
    double efd = 0.0;    // field voltage, pu
};

struct Contingency {
    int fault_bus = 0;
    double t_apply = 0.0;
    double t_clear = 0.1;
    double fault_admittance = 1e4;  // pu shunt magnitude of the bolted fault
};

struct SimConfig {
    double dt = 0.005;
    double t_end = 5.0;
    double freq_filter_tc = 0.05;  // washout time constant for bus frequency
};

struct Trajectory {
    std::vector<double> times;  // uniformly spaced, starts at 0
    Eigen::MatrixXd v_mag;      // T x N, pu
    Eigen::MatrixXd delta_f;    // T x N, pu frequency deviation
    Eigen::MatrixXd bess_p;     // T x n_es, pu
    Eigen::MatrixXd bess_soc;   // T x n_es, fraction
    std::vector<int> bess_buses;

    int steps() const { return static_cast<int>(times.size()); }
};

// Washout-filtered angle derivative over a recorded angle history; returns the
// final per-unit frequency deviation estimate. Needs at least two samples.
double estimate_bus_frequency(std::span<const double> theta_history, double dt,
                              double freq_filter_tc, double nominal_hz);

// Time-domain simulator: two-axis machines with first-order AVRs, constant
// impedance loads folded into the admittance matrix, BESS units as
// frequency-droop power injections. Partitioned explicit integration:
// Heun predictor-corrector on the ODEs alternated with the network solve.
class DynamicSimulator {
public:
    DynamicSimulator(const NetworkCase& c, const PowerFlowSolution& pf,
                     const std::vector<int>& placement_buses, double freq_filter_tc = 0.05);

    // advances the state from t to t + dt
    void step(const Contingency& cont, double t, double dt);

    const std::vector<GeneratorState>& generator_states() const { return gens_; }
    const std::vector<BessState>& bess_states() const { return bess_; }
    const Eigen::VectorXcd& bus_voltage() const { return v_; }
    const std::vector<int>& bess_buses() const { return bess_bus_idx_; }
    // pu frequency deviation estimate at a bus (by internal index)
    double bus_frequency(int bus_idx) const;
    double max_equilibrium_residual() const;  // at construction time

private:
    struct Machine {
        Generator params;
        int bus_idx;
        double pm;      // mechanical power, pu
        double v_ref;   // AVR reference, pu
        bool ed_dynamic;  // tq0_p > 0
    };

    struct Derivs {
        std::vector<double> gen;  // 5 per machine: delta, omega, eq_p, ed_p, efd
        std::vector<double> wash;
    };

    void solve_network(bool faulted, int fault_bus_idx, double fault_y,
                       const std::vector<GeneratorState>& gens,
                       const std::vector<double>& bess_power, Eigen::VectorXcd& v) const;
    Derivs derivatives(const std::vector<GeneratorState>& gens,
                       const std::vector<double>& wash, const Eigen::VectorXcd& v) const;
    double unwrap(double raw, double ref) const;

    const NetworkCase& case_;
    int n_;
    std::vector<Machine> machines_;
    std::vector<GeneratorState> gens_;
    std::vector<BessState> bess_;
    std::vector<int> bess_bus_idx_;
    double e_pu_s_;
    double freq_tc_ = 0.05;
    double omega_base_;  // 2*pi*f0

    Eigen::MatrixXcd y_normal_;  // loads + machine Nortons folded in
    mutable Eigen::PartialPivLU<Eigen::MatrixXcd> lu_normal_;
    mutable Eigen::PartialPivLU<Eigen::MatrixXcd> lu_fault_;
    mutable bool fault_lu_ready_ = false;
    mutable int fault_lu_bus_ = -1;
    mutable double fault_lu_y_ = 0.0;

    Eigen::VectorXcd v_;              // last committed network solution
    std::vector<double> theta_;       // unwrapped bus angles at v_
    std::vector<double> wash_;        // washout states per bus
    double init_residual_ = 0.0;
};

// Full run over [0, t_end]. Deterministic: identical inputs give bit-identical
// trajectories. The power flow is computed internally when pf is null.
Trajectory simulate(const NetworkCase& c, const std::vector<int>& placement_buses,
                    const Contingency& cont, const SimConfig& cfg,
                    const PowerFlowSolution* pf = nullptr);

}  // namespace bessplace
