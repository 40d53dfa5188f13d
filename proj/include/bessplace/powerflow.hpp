#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "bessplace/netcase.hpp"

namespace bessplace {

struct PowerFlowSolution {
    Eigen::VectorXd v_mag;   // pu, per bus (case order)
    Eigen::VectorXd v_ang;   // rad, per bus
    std::vector<double> p_gen;  // pu, per generator (case order)
    std::vector<double> q_gen;  // pu, per generator
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

// Bus admittance matrix including branch charging, taps, and bus shunts.
Eigen::SparseMatrix<std::complex<double>> build_ybus(const NetworkCase& c);

// Full-Newton power flow in polar form, flat start. Throws Numerical with the
// iteration history when max_iter is exceeded.
PowerFlowSolution solve_power_flow(const NetworkCase& c, double tol = 1e-8, int max_iter = 20);

}  // namespace bessplace
