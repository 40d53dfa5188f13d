#include "bessplace/powerflow.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "bessplace/errors.hpp"

namespace bessplace {

using cplx = std::complex<double>;

Eigen::SparseMatrix<cplx> build_ybus(const NetworkCase& c) {
    const int n = c.n_buses();
    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(c.branches.size() * 4 + n);

    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const int f = c.bus_index(br.from_bus);
        const int t = c.bus_index(br.to_bus);
        const cplx y = 1.0 / cplx(br.r, br.x);
        const cplx ysh(0.0, br.b_shunt / 2.0);
        const double a = br.tap_ratio;
        trips.emplace_back(f, f, (y + ysh) / (a * a));
        trips.emplace_back(t, t, y + ysh);
        trips.emplace_back(f, t, -y / a);
        trips.emplace_back(t, f, -y / a);
    }
    for (int i = 0; i < n; ++i) {
        const Bus& b = c.buses[i];
        if (b.shunt_g != 0.0 || b.shunt_b != 0.0)
            trips.emplace_back(i, i, cplx(b.shunt_g, b.shunt_b));
    }

    Eigen::SparseMatrix<cplx> y(n, n);
    y.setFromTriplets(trips.begin(), trips.end());
    return y;
}

namespace {

// P/Q injections at every bus for voltages in polar form.
void calc_injections(const Eigen::SparseMatrix<cplx>& y, const Eigen::VectorXd& vm,
                     const Eigen::VectorXd& va, Eigen::VectorXd& p, Eigen::VectorXd& q) {
    const int n = static_cast<int>(vm.size());
    p.setZero(n);
    q.setZero(n);
    for (int k = 0; k < y.outerSize(); ++k) {
        for (Eigen::SparseMatrix<cplx>::InnerIterator it(y, k); it; ++it) {
            const int i = static_cast<int>(it.row());
            const int j = static_cast<int>(it.col());
            const double g = it.value().real();
            const double b = it.value().imag();
            const double th = va[i] - va[j];
            p[i] += vm[i] * vm[j] * (g * std::cos(th) + b * std::sin(th));
            q[i] += vm[i] * vm[j] * (g * std::sin(th) - b * std::cos(th));
        }
    }
}

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkCase& c, double tol, int max_iter) {
    if (tol <= 0.0) fail_validation("power flow tolerance must be positive");
    const int n = c.n_buses();
    const auto y = build_ybus(c);
    const int slack = c.slack_index();

    // net scheduled injections
    Eigen::VectorXd p_spec = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd q_spec = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        p_spec[i] -= c.buses[i].p_load;
        q_spec[i] -= c.buses[i].q_load;
    }
    for (const auto& g : c.generators) p_spec[c.bus_index(g.bus)] += g.p_set;

    // flat start; pv/slack magnitudes pinned to their set points
    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (c.buses[i].kind != BusKind::Pq) vm[i] = c.buses[i].v_setpoint;

    std::vector<int> ang_idx, mag_idx;  // unknown ordering
    for (int i = 0; i < n; ++i) {
        if (i != slack) ang_idx.push_back(i);
        if (c.buses[i].kind == BusKind::Pq) mag_idx.push_back(i);
    }
    const int na = static_cast<int>(ang_idx.size());
    const int nm = static_cast<int>(mag_idx.size());
    const int nu = na + nm;

    Eigen::VectorXd p_calc(n), q_calc(n);
    std::vector<double> history;

    auto mismatch = [&](Eigen::VectorXd& f) {
        calc_injections(y, vm, va, p_calc, q_calc);
        f.resize(nu);
        for (int k = 0; k < na; ++k) f[k] = p_spec[ang_idx[k]] - p_calc[ang_idx[k]];
        for (int k = 0; k < nm; ++k) f[na + k] = q_spec[mag_idx[k]] - q_calc[mag_idx[k]];
        return f.size() > 0 ? f.cwiseAbs().maxCoeff() : 0.0;
    };

    Eigen::VectorXd f;
    double max_mis = mismatch(f);
    int iter = 0;

    std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
    for (int k = 0; k < na; ++k) ang_pos[ang_idx[k]] = k;
    for (int k = 0; k < nm; ++k) mag_pos[mag_idx[k]] = na + k;

    while (max_mis >= tol && iter < max_iter) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nu, nu);
        for (int k = 0; k < y.outerSize(); ++k) {
            for (Eigen::SparseMatrix<cplx>::InnerIterator it(y, k); it; ++it) {
                const int i = static_cast<int>(it.row());
                const int j = static_cast<int>(it.col());
                const double g = it.value().real();
                const double b = it.value().imag();
                const double th = va[i] - va[j];
                const double ct = std::cos(th), st = std::sin(th);
                if (i == j) {
                    if (ang_pos[i] >= 0) {
                        jac(ang_pos[i], ang_pos[i]) += -q_calc[i] - b * vm[i] * vm[i];
                        if (mag_pos[i] >= 0) jac(ang_pos[i], mag_pos[i]) += p_calc[i] / vm[i] + g * vm[i];
                    }
                    if (mag_pos[i] >= 0) {
                        if (ang_pos[i] >= 0) jac(mag_pos[i], ang_pos[i]) += p_calc[i] - g * vm[i] * vm[i];
                        jac(mag_pos[i], mag_pos[i]) += q_calc[i] / vm[i] - b * vm[i];
                    }
                } else {
                    const double dp_dth = vm[i] * vm[j] * (g * st - b * ct);
                    const double dp_dv = vm[i] * (g * ct + b * st);
                    const double dq_dth = -vm[i] * vm[j] * (g * ct + b * st);
                    const double dq_dv = vm[i] * (g * st - b * ct);
                    if (ang_pos[i] >= 0) {
                        if (ang_pos[j] >= 0) jac(ang_pos[i], ang_pos[j]) += dp_dth;
                        if (mag_pos[j] >= 0) jac(ang_pos[i], mag_pos[j]) += dp_dv;
                    }
                    if (mag_pos[i] >= 0) {
                        if (ang_pos[j] >= 0) jac(mag_pos[i], ang_pos[j]) += dq_dth;
                        if (mag_pos[j] >= 0) jac(mag_pos[i], mag_pos[j]) += dq_dv;
                    }
                }
            }
        }

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        Eigen::VectorXd dx = lu.solve(f);
        if (!dx.allFinite()) fail_numerical("power flow Jacobian solve produced non-finite update");

        for (int k = 0; k < na; ++k) va[ang_idx[k]] += dx[k];
        for (int k = 0; k < nm; ++k) vm[mag_idx[k]] += dx[na + k];
        ++iter;
        max_mis = mismatch(f);
        history.push_back(max_mis);
    }

    if (max_mis >= tol) {
        std::ostringstream os;
        os << "power flow did not converge after " << iter << " iterations; mismatch history:";
        for (double h : history) os << " " << h;
        fail_numerical(os.str());
    }

    PowerFlowSolution sol;
    sol.v_mag = vm;
    sol.v_ang = va;
    sol.converged = true;
    sol.iterations = iter;
    sol.max_mismatch = max_mis;

    // allocate bus-level generation to individual units
    calc_injections(y, vm, va, p_calc, q_calc);
    std::vector<double> bus_mva(n, 0.0);
    for (const auto& g : c.generators) bus_mva[c.bus_index(g.bus)] += g.mva_base;
    sol.p_gen.resize(c.generators.size());
    sol.q_gen.resize(c.generators.size());
    for (size_t gi = 0; gi < c.generators.size(); ++gi) {
        const auto& g = c.generators[gi];
        const int i = c.bus_index(g.bus);
        const double share = g.mva_base / bus_mva[i];
        const double q_total = q_calc[i] + c.buses[i].q_load;
        sol.q_gen[gi] = q_total * share;
        if (i == slack) {
            const double p_total = p_calc[i] + c.buses[i].p_load;
            sol.p_gen[gi] = p_total * share;
        } else {
            sol.p_gen[gi] = g.p_set;
        }
    }
    return sol;
}

}  // namespace bessplace
