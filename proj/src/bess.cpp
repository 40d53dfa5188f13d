#include "bessplace/bess.hpp"

#include <algorithm>
#include <cmath>

namespace bessplace {

double reference_power(double delta_f, const BessSpec& spec) {
    const double p_ref = -spec.k_es * delta_f;
    return std::clamp(p_ref, -spec.p_max, spec.p_max);
}

double gate_reference(double p_ref, double soc, const BessSpec& spec) {
    if (p_ref > 0.0 && soc > spec.soc_min) return p_ref;
    if (p_ref < 0.0 && soc < spec.soc_max) return p_ref;
    return 0.0;
}

BessState advance(const BessState& state, double p_ref_gated, double dt,
                  const BessSpec& spec, double e_pu_s) {
    const double decay = std::exp(-dt / spec.t_es);
    double p_next = p_ref_gated + (state.p_es - p_ref_gated) * decay;
    p_next = std::clamp(p_next, -spec.p_max, spec.p_max);

    double soc_next = state.soc - 0.5 * (state.p_es + p_next) * dt / e_pu_s;
    if (soc_next <= spec.soc_min) {
        soc_next = spec.soc_min;
        p_next = 0.0;
    } else if (soc_next >= spec.soc_max) {
        soc_next = spec.soc_max;
        p_next = 0.0;
    }
    return BessState{p_next, soc_next};
}

}  // namespace bessplace
