#pragma once

#include "bessplace/netcase.hpp"

namespace bessplace {

struct BessState {
    double p_es = 0.0;  // pu active output, positive = discharging
    double soc = 0.5;   // fraction of capacity
};

// Frequency-droop reference -k_es * delta_f, clamped to +/- p_max.
double reference_power(double delta_f, const BessSpec& spec);

// SOC gate: discharge needs soc above soc_min, charge needs soc below
// soc_max; reference passes through unchanged or becomes zero.
double gate_reference(double p_ref, double soc, const BessSpec& spec);

// One step of the converter lag and SOC bookkeeping. The lag uses the exact
// exponential discretization (t_es is close to typical dt, Euler would not
// hold the step-response tolerance); SOC integrates the trapezoid of the
// output samples so that delta-SOC times capacity matches the trapezoidal
// energy integral identically. e_pu_s is the capacity in pu-seconds.
BessState advance(const BessState& state, double p_ref_gated, double dt,
                  const BessSpec& spec, double e_pu_s);

}  // namespace bessplace
