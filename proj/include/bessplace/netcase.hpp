#pragma once

#include <string>
#include <vector>

namespace bessplace {

enum class BusKind { Slack, Pv, Pq };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::Pq;
    double base_kv = 0.0;
    double v_setpoint = 1.0;  // pv/slack only
    double p_load = 0.0;      // pu on system base
    double q_load = 0.0;      // pu on system base
    double shunt_g = 0.0;     // pu admittance
    double shunt_b = 0.0;     // pu admittance
    bool is_generator_bus = false;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_shunt = 0.0;    // total line charging, pu
    double tap_ratio = 1.0;  // on the from side
    bool in_service = true;
};

struct Generator {
    int bus = 0;
    double mva_base = 100.0;
    double p_set = 0.0;  // scheduled active output, pu on system base
    double h = 0.0;      // inertia constant, s
    double d = 0.0;      // damping torque coefficient, pu
    double xd = 0.0, xq = 0.0;
    double xd_p = 0.0, xq_p = 0.0;
    double td0_p = 0.0, tq0_p = 0.0;  // open-circuit time constants, s
    double avr_gain = 0.0;
    double avr_time = 0.0;
    double efd_min = 0.0, efd_max = 0.0;
};

struct BessSpec {
    double k_es = 10.0;    // pu power per pu frequency deviation
    double t_es = 0.02;    // converter lag, s
    double e_total = 10.0; // MWh
    double soc_init = 0.5;
    double soc_min = 0.2;
    double soc_max = 0.8;
    double p_max = 1.0;    // pu ceiling on system base
};

struct NetworkCase {
    std::vector<Bus> buses;  // sorted ascending by id after parse
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    BessSpec bess_template;
    std::vector<int> placement_exclusions;
    double system_mva_base = 100.0;
    double nominal_hz = 60.0;

    int bus_index(int id) const;  // throws Validation if the id is unknown
    int slack_index() const;
    int n_buses() const { return static_cast<int>(buses.size()); }

    // Battery energy capacity as per-unit power times seconds; the SOC
    // integral of the simulation runs in these units.
    double bess_energy_pu_seconds() const {
        return bess_template.e_total * 3600.0 / system_mva_base;
    }
};

// Parses and validates a JSON case file. Loads and generator set points are
// in MW/MVAr in the file and converted to per-unit on system_mva_base here.
NetworkCase parse_case(const std::string& text);
NetworkCase load_case(const std::string& path);
std::string serialize_case(const NetworkCase& c);

// Buses eligible for BESS placement, ascending by id, exclusions removed.
std::vector<int> candidate_buses(const NetworkCase& c);

void validate_case(const NetworkCase& c);

}  // namespace bessplace
