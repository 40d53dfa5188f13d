#include "bessplace/dynsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bessplace/errors.hpp"

namespace bessplace {

using cplx = std::complex<double>;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kEdAlgebraicTc = 1e-9;  // tq0_p at or below this: ed_p treated as algebraic
constexpr double kFixedPointTol = 1e-10;
constexpr int kFixedPointMaxIter = 80;

struct DqFrame {
    double vd, vq;
};

inline DqFrame to_dq(const cplx& v, double delta) {
    const double s = std::sin(delta), c = std::cos(delta);
    return {v.real() * s - v.imag() * c, v.real() * c + v.imag() * s};
}

inline cplx from_dq(double fd, double fq, double delta) {
    const double s = std::sin(delta), c = std::cos(delta);
    return {fd * s + fq * c, -fd * c + fq * s};
}

}  // namespace

double estimate_bus_frequency(std::span<const double> theta_history, double dt,
                              double freq_filter_tc, double nominal_hz) {
    if (theta_history.size() < 2) fail_validation("frequency estimate needs at least two samples");
    const double tc = freq_filter_tc;
    double w = theta_history[0];
    for (size_t k = 0; k + 1 < theta_history.size(); ++k) {
        const double f0 = (theta_history[k] - w) / tc;
        const double w_pred = w + dt * f0;
        const double f1 = (theta_history[k + 1] - w_pred) / tc;
        w += 0.5 * dt * (f0 + f1);
    }
    return (theta_history.back() - w) / (tc * 2.0 * kPi * nominal_hz);
}

DynamicSimulator::DynamicSimulator(const NetworkCase& c, const PowerFlowSolution& pf,
                                   const std::vector<int>& placement_buses, double freq_filter_tc)
    : case_(c), n_(c.n_buses()), freq_tc_(freq_filter_tc) {
    if (!pf.converged) fail_validation("dynamic initialization requires a converged power flow");
    if (freq_filter_tc <= 0.0) fail_validation("freq_filter_tc must be positive");
    omega_base_ = 2.0 * kPi * c.nominal_hz;
    e_pu_s_ = c.bess_energy_pu_seconds();

    // constant-impedance loads from the pre-fault operating point
    Eigen::MatrixXcd y_dyn = Eigen::MatrixXcd(build_ybus(c));
    for (int j = 0; j < n_; ++j) {
        const Bus& b = c.buses[j];
        if (b.p_load != 0.0 || b.q_load != 0.0) {
            const double v2 = pf.v_mag[j] * pf.v_mag[j];
            y_dyn(j, j) += cplx(b.p_load, -b.q_load) / v2;
        }
    }

    // machine equilibrium from the power flow solution
    machines_.reserve(c.generators.size());
    gens_.reserve(c.generators.size());
    for (size_t gi = 0; gi < c.generators.size(); ++gi) {
        const Generator& g = c.generators[gi];
        Machine m;
        m.params = g;
        m.bus_idx = c.bus_index(g.bus);
        m.ed_dynamic = g.tq0_p > kEdAlgebraicTc;

        const cplx v = std::polar(pf.v_mag[m.bus_idx], pf.v_ang[m.bus_idx]);
        const cplx s(pf.p_gen[gi], pf.q_gen[gi]);
        const cplx i_term = std::conj(s / v);
        const cplx e_q_axis = v + cplx(0.0, g.xq) * i_term;

        GeneratorState st;
        st.delta = std::arg(e_q_axis);
        st.omega = 0.0;
        const auto [vd, vq] = to_dq(v, st.delta);
        const auto [id, iq] = to_dq(cplx(i_term), st.delta);
        st.eq_p = vq + g.xd_p * id;
        st.ed_p = vd - g.xq_p * iq;
        st.efd = st.eq_p + (g.xd - g.xd_p) * id;
        if (st.efd < g.efd_min || st.efd > g.efd_max) {
            std::ostringstream os;
            os << "initialization: machine at bus " << g.bus << " needs efd=" << st.efd
               << " outside [" << g.efd_min << ", " << g.efd_max << "]";
            fail_numerical(os.str());
        }
        m.pm = vd * id + vq * iq;
        m.v_ref = g.avr_gain > 0.0 ? pf.v_mag[m.bus_idx] + st.efd / g.avr_gain : 0.0;

        y_dyn(m.bus_idx, m.bus_idx) += cplx(0.0, -1.0 / g.xd_p);  // Norton admittance
        machines_.push_back(m);
        gens_.push_back(st);
    }

    y_normal_ = std::move(y_dyn);
    lu_normal_.compute(y_normal_);

    // BESS units, ascending bus order
    std::vector<int> sorted_placement = placement_buses;
    std::sort(sorted_placement.begin(), sorted_placement.end());
    for (int bus_id : sorted_placement) {
        bess_bus_idx_.push_back(c.bus_index(bus_id));
        bess_.push_back(BessState{0.0, c.bess_template.soc_init});
    }

    v_.resize(n_);
    theta_.resize(n_);
    wash_.resize(n_);
    for (int j = 0; j < n_; ++j) {
        v_[j] = std::polar(pf.v_mag[j], pf.v_ang[j]);
        theta_[j] = pf.v_ang[j];
        wash_[j] = pf.v_ang[j];
    }

    const Derivs d0 = derivatives(gens_, wash_, v_);
    double worst = 0.0;
    int worst_machine = -1;
    for (size_t m = 0; m < machines_.size(); ++m) {
        for (int k = 0; k < 5; ++k) {
            const double r = std::abs(d0.gen[m * 5 + k]);
            if (r > worst) {
                worst = r;
                worst_machine = static_cast<int>(m);
            }
        }
    }
    init_residual_ = worst;
    if (worst > 1e-8) {
        std::ostringstream os;
        os << "initialization: machine at bus " << machines_[worst_machine].params.bus
           << " has equilibrium residual " << worst;
        fail_numerical(os.str());
    }
}

double DynamicSimulator::max_equilibrium_residual() const { return init_residual_; }

double DynamicSimulator::bus_frequency(int bus_idx) const {
    return (theta_[bus_idx] - wash_[bus_idx]) / (freq_tc_ * omega_base_);
}

double DynamicSimulator::unwrap(double raw, double ref) const {
    double d = raw - ref;
    while (d > kPi) d -= 2.0 * kPi;
    while (d < -kPi) d += 2.0 * kPi;
    return ref + d;
}

void DynamicSimulator::solve_network(bool faulted, int fault_bus_idx, double fault_y,
                                     const std::vector<GeneratorState>& gens,
                                     const std::vector<double>& bess_power,
                                     Eigen::VectorXcd& v) const {
    const Eigen::PartialPivLU<Eigen::MatrixXcd>* lu = &lu_normal_;
    if (faulted) {
        if (!fault_lu_ready_ || fault_lu_bus_ != fault_bus_idx || fault_lu_y_ != fault_y) {
            Eigen::MatrixXcd yf = y_normal_;
            yf(fault_bus_idx, fault_bus_idx) += cplx(fault_y, 0.0);
            lu_fault_.compute(yf);
            fault_lu_ready_ = true;
            fault_lu_bus_ = fault_bus_idx;
            fault_lu_y_ = fault_y;
        }
        lu = &lu_fault_;
    }

    Eigen::VectorXcd inj(n_);
    Eigen::VectorXcd v_next(n_);
    for (int it = 0; it < kFixedPointMaxIter; ++it) {
        inj.setZero();
        for (size_t m = 0; m < machines_.size(); ++m) {
            const Machine& mc = machines_[m];
            const GeneratorState& st = gens[m];
            const auto [vd, vq] = to_dq(v[mc.bus_idx], st.delta);
            const double id = (st.eq_p - vq) / mc.params.xd_p;
            const double iq = mc.ed_dynamic ? (vd - st.ed_p) / mc.params.xq_p
                                            : vd / mc.params.xq;
            inj[mc.bus_idx] += from_dq(id, iq, st.delta) +
                               cplx(0.0, -1.0 / mc.params.xd_p) * v[mc.bus_idx];
        }
        for (size_t u = 0; u < bess_bus_idx_.size(); ++u) {
            const double p = bess_power[u];
            if (p == 0.0) continue;
            const int j = bess_bus_idx_[u];
            const double vm = std::abs(v[j]);
            if (vm < 1e-6) continue;
            // converter current limit: full output available down to 0.25 pu voltage
            const double i_mag = std::min(std::abs(p) / vm, 4.0 * case_.bess_template.p_max);
            inj[j] += (p >= 0.0 ? i_mag : -i_mag) * v[j] / vm;
        }

        v_next = lu->solve(inj);
        const double err = (v_next - v).cwiseAbs().maxCoeff();
        v = v_next;
        if (err < kFixedPointTol) return;
    }
    fail_numerical("network fixed-point iteration did not converge");
}

DynamicSimulator::Derivs DynamicSimulator::derivatives(const std::vector<GeneratorState>& gens,
                                                       const std::vector<double>& wash,
                                                       const Eigen::VectorXcd& v) const {
    Derivs d;
    d.gen.resize(machines_.size() * 5);
    d.wash.resize(n_);

    for (size_t m = 0; m < machines_.size(); ++m) {
        const Machine& mc = machines_[m];
        const Generator& g = mc.params;
        const GeneratorState& st = gens[m];
        const auto [vd, vq] = to_dq(v[mc.bus_idx], st.delta);
        const double id = (st.eq_p - vq) / g.xd_p;
        const double iq = mc.ed_dynamic ? (vd - st.ed_p) / g.xq_p : vd / g.xq;
        const double pe = vd * id + vq * iq;

        d.gen[m * 5 + 0] = omega_base_ * st.omega;
        d.gen[m * 5 + 1] = (mc.pm - pe - g.d * st.omega) / (2.0 * g.h);
        d.gen[m * 5 + 2] = (-st.eq_p - (g.xd - g.xd_p) * id + st.efd) / g.td0_p;
        d.gen[m * 5 + 3] = mc.ed_dynamic ? (-st.ed_p + (g.xq - g.xq_p) * iq) / g.tq0_p : 0.0;

        double defd = 0.0;
        if (g.avr_gain > 0.0) {
            const double vm = std::abs(v[mc.bus_idx]);
            defd = (g.avr_gain * (mc.v_ref - vm) - st.efd) / g.avr_time;
            // non-windup limiter
            if ((st.efd >= g.efd_max && defd > 0.0) || (st.efd <= g.efd_min && defd < 0.0))
                defd = 0.0;
        }
        d.gen[m * 5 + 4] = defd;
    }

    for (int j = 0; j < n_; ++j) {
        const double th = unwrap(std::arg(v[j]), theta_[j]);
        d.wash[j] = (th - wash[j]) / freq_tc_;
    }
    return d;
}

void DynamicSimulator::step(const Contingency& cont, double t, double dt) {
    const double t_next = t + dt;
    const bool faulted = t_next >= cont.t_apply && t_next < cont.t_clear;
    const int fault_idx = faulted ? case_.bus_index(cont.fault_bus) : -1;

    // BESS: zero-order hold over the step, driven by the committed frequency estimate
    std::vector<double> bess_power(bess_.size());
    std::vector<BessState> bess_next(bess_.size());
    for (size_t u = 0; u < bess_.size(); ++u) {
        const double df = bus_frequency(bess_bus_idx_[u]);
        const double p_ref = reference_power(df, case_.bess_template);
        const double gated = gate_reference(p_ref, bess_[u].soc, case_.bess_template);
        bess_next[u] = advance(bess_[u], gated, dt, case_.bess_template, e_pu_s_);
        bess_power[u] = bess_next[u].p_es;
    }

    const Derivs f0 = derivatives(gens_, wash_, v_);

    auto apply = [&](const std::vector<GeneratorState>& base, const Derivs& da,
                     const Derivs* db, double h) {
        std::vector<GeneratorState> out(base.size());
        for (size_t m = 0; m < base.size(); ++m) {
            auto rate = [&](int k) {
                return db ? 0.5 * (da.gen[m * 5 + k] + db->gen[m * 5 + k]) : da.gen[m * 5 + k];
            };
            out[m].delta = base[m].delta + h * rate(0);
            out[m].omega = base[m].omega + h * rate(1);
            out[m].eq_p = base[m].eq_p + h * rate(2);
            out[m].ed_p = base[m].ed_p + h * rate(3);
            out[m].efd = std::clamp(base[m].efd + h * rate(4), machines_[m].params.efd_min,
                                    machines_[m].params.efd_max);
        }
        return out;
    };
    auto apply_wash = [&](const std::vector<double>& base, const Derivs& da, const Derivs* db,
                          double h) {
        std::vector<double> out(n_);
        for (int j = 0; j < n_; ++j) {
            const double r = db ? 0.5 * (da.wash[j] + db->wash[j]) : da.wash[j];
            out[j] = base[j] + h * r;
        }
        return out;
    };

    // predictor
    std::vector<GeneratorState> gens_pred = apply(gens_, f0, nullptr, dt);
    std::vector<double> wash_pred = apply_wash(wash_, f0, nullptr, dt);
    Eigen::VectorXcd v_work = v_;
    solve_network(faulted, fault_idx, cont.fault_admittance, gens_pred, bess_power, v_work);

    // corrector
    const Derivs f1 = derivatives(gens_pred, wash_pred, v_work);
    std::vector<GeneratorState> gens_new = apply(gens_, f0, &f1, dt);
    std::vector<double> wash_new = apply_wash(wash_, f0, &f1, dt);
    solve_network(faulted, fault_idx, cont.fault_admittance, gens_new, bess_power, v_work);

    // commit
    gens_ = std::move(gens_new);
    wash_ = std::move(wash_new);
    v_ = v_work;
    for (int j = 0; j < n_; ++j) theta_[j] = unwrap(std::arg(v_[j]), theta_[j]);
    for (size_t m = 0; m < machines_.size(); ++m) {
        if (!machines_[m].ed_dynamic) {
            const Machine& mc = machines_[m];
            const auto [vd, vq] = to_dq(v_[mc.bus_idx], gens_[m].delta);
            gens_[m].ed_p = (mc.params.xq - mc.params.xq_p) * (vd / mc.params.xq);
        }
    }
    bess_ = std::move(bess_next);
}

Trajectory simulate(const NetworkCase& c, const std::vector<int>& placement_buses,
                    const Contingency& cont, const SimConfig& cfg,
                    const PowerFlowSolution* pf) {
    if (!(cfg.dt > 0.0 && cfg.dt < cfg.t_end)) fail_validation("sim config requires 0 < dt < t_end");
    if (cont.t_clear < cont.t_apply || cont.t_apply < 0.0)
        fail_validation("contingency requires t_clear >= t_apply >= 0");
    if (cont.t_clear > cont.t_apply) c.bus_index(cont.fault_bus);  // must exist

    PowerFlowSolution local_pf;
    if (!pf) {
        local_pf = solve_power_flow(c);
        pf = &local_pf;
    }

    DynamicSimulator sim(c, *pf, placement_buses, cfg.freq_filter_tc);

    const int n_steps = static_cast<int>(std::llround(cfg.t_end / cfg.dt));
    const int n = c.n_buses();
    const int n_es = static_cast<int>(sim.bess_buses().size());

    Trajectory traj;
    traj.times.resize(n_steps + 1);
    traj.v_mag.resize(n_steps + 1, n);
    traj.delta_f.resize(n_steps + 1, n);
    traj.bess_p.resize(n_steps + 1, n_es);
    traj.bess_soc.resize(n_steps + 1, n_es);
    for (int idx : sim.bess_buses()) traj.bess_buses.push_back(c.buses[idx].id);

    auto record = [&](int row) {
        for (int j = 0; j < n; ++j) {
            traj.v_mag(row, j) = std::abs(sim.bus_voltage()[j]);
            traj.delta_f(row, j) = sim.bus_frequency(j);
        }
        for (int u = 0; u < n_es; ++u) {
            traj.bess_p(row, u) = sim.bess_states()[u].p_es;
            traj.bess_soc(row, u) = sim.bess_states()[u].soc;
        }
    };

    traj.times[0] = 0.0;
    record(0);
    for (int k = 0; k < n_steps; ++k) {
        const double t = k * cfg.dt;
        try {
            sim.step(cont, t, cfg.dt);
        } catch (const Error& e) {
            std::ostringstream os;
            os << e.what() << " (at t=" << t << " s)";
            throw Error(e.kind(), os.str());
        }
        for (const auto& st : sim.generator_states()) {
            if (!std::isfinite(st.delta) || !std::isfinite(st.omega) || !std::isfinite(st.eq_p) ||
                !std::isfinite(st.ed_p) || !std::isfinite(st.efd)) {
                std::ostringstream os;
                os << "non-finite machine state at t=" << t + cfg.dt << " s";
                fail_numerical(os.str());
            }
        }
        traj.times[k + 1] = (k + 1) * cfg.dt;
        record(k + 1);
    }
    return traj;
}

}  // namespace bessplace
