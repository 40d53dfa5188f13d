#include "bessplace/netcase.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "bessplace/errors.hpp"

namespace bessplace {

namespace {

using json = nlohmann::ordered_json;

double get_num(const json& j, const char* key, double fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) fail_validation(std::string("missing field '") + key + "'");
        return fallback;
    }
    if (!j[key].is_number()) fail_validation(std::string("field '") + key + "' must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const char* key) {
    if (!j.contains(key)) fail_validation(std::string("missing field '") + key + "'");
    if (!j[key].is_number_integer()) fail_validation(std::string("field '") + key + "' must be an integer");
    return j[key].get<int>();
}

BusKind parse_kind(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::Pv;
    if (s == "pq") return BusKind::Pq;
    fail_validation("bus kind '" + s + "' is not one of slack/pv/pq");
}

const char* kind_name(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::Pv: return "pv";
        default: return "pq";
    }
}

}  // namespace

int NetworkCase::bus_index(int id) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), id,
                               [](const Bus& b, int v) { return b.id < v; });
    if (it == buses.end() || it->id != id)
        fail_validation("bus id " + std::to_string(id) + " does not exist");
    return static_cast<int>(it - buses.begin());
}

int NetworkCase::slack_index() const {
    for (int i = 0; i < n_buses(); ++i)
        if (buses[i].kind == BusKind::Slack) return i;
    fail_validation("case has no slack bus");
}

NetworkCase parse_case(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail_validation(std::string("case file is not valid JSON: ") + e.what());
    }

    NetworkCase c;
    if (j.contains("system")) {
        const auto& sys = j["system"];
        c.system_mva_base = get_num(sys, "mva_base", 100.0);
        c.nominal_hz = get_num(sys, "nominal_hz", 60.0);
    }
    if (c.system_mva_base <= 0.0) fail_validation("system.mva_base must be positive");
    if (c.nominal_hz <= 0.0) fail_validation("system.nominal_hz must be positive");

    if (!j.contains("buses") || !j["buses"].is_array() || j["buses"].empty())
        fail_validation("case must contain a non-empty 'buses' array");
    for (const auto& jb : j["buses"]) {
        Bus b;
        b.id = get_int(jb, "id");
        if (!jb.contains("kind") || !jb["kind"].is_string())
            fail_validation("bus " + std::to_string(b.id) + ": missing or non-string 'kind'");
        b.kind = parse_kind(jb["kind"].get<std::string>());
        b.base_kv = get_num(jb, "base_kv", 0.0, true);
        b.v_setpoint = get_num(jb, "v_setpoint", 1.0);
        b.p_load = get_num(jb, "p_load", 0.0) / c.system_mva_base;  // MW in file
        b.q_load = get_num(jb, "q_load", 0.0) / c.system_mva_base;  // MVAr in file
        b.shunt_g = get_num(jb, "shunt_g", 0.0);
        b.shunt_b = get_num(jb, "shunt_b", 0.0);
        b.is_generator_bus = jb.value("is_generator_bus", false);
        c.buses.push_back(b);
    }
    std::sort(c.buses.begin(), c.buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });

    if (j.contains("branches")) {
        for (const auto& jb : j["branches"]) {
            Branch br;
            br.from_bus = get_int(jb, "from_bus");
            br.to_bus = get_int(jb, "to_bus");
            br.r = get_num(jb, "r", 0.0);
            br.x = get_num(jb, "x", 0.0, true);
            br.b_shunt = get_num(jb, "b_shunt", 0.0);
            br.tap_ratio = get_num(jb, "tap_ratio", 1.0);
            br.in_service = jb.value("in_service", true);
            c.branches.push_back(br);
        }
    }

    if (j.contains("generators")) {
        for (const auto& jg : j["generators"]) {
            Generator g;
            g.bus = get_int(jg, "bus");
            g.mva_base = get_num(jg, "mva_base", c.system_mva_base);
            g.p_set = get_num(jg, "p_set", 0.0) / c.system_mva_base;  // MW in file
            g.h = get_num(jg, "h", 0.0, true);
            g.d = get_num(jg, "d", 0.0);
            g.xd = get_num(jg, "xd", 0.0, true);
            g.xq = get_num(jg, "xq", 0.0, true);
            g.xd_p = get_num(jg, "xd_p", 0.0, true);
            g.xq_p = get_num(jg, "xq_p", 0.0, true);
            g.td0_p = get_num(jg, "td0_p", 0.0, true);
            g.tq0_p = get_num(jg, "tq0_p", 0.0);
            g.avr_gain = get_num(jg, "avr_gain", 0.0);
            g.avr_time = get_num(jg, "avr_time", 0.05);
            g.efd_min = get_num(jg, "efd_min", 0.0);
            g.efd_max = get_num(jg, "efd_max", 5.0);
            c.generators.push_back(g);
        }
    }

    if (j.contains("bess_template")) {
        const auto& jt = j["bess_template"];
        BessSpec& t = c.bess_template;
        t.k_es = get_num(jt, "k_es", t.k_es);
        t.t_es = get_num(jt, "t_es", t.t_es);
        t.e_total = get_num(jt, "e_total", t.e_total);
        t.soc_init = get_num(jt, "soc_init", t.soc_init);
        t.soc_min = get_num(jt, "soc_min", t.soc_min);
        t.soc_max = get_num(jt, "soc_max", t.soc_max);
        t.p_max = get_num(jt, "p_max", t.p_max);
    }

    if (j.contains("placement_exclusions")) {
        for (const auto& je : j["placement_exclusions"]) {
            if (!je.is_number_integer()) fail_validation("placement_exclusions entries must be bus ids");
            c.placement_exclusions.push_back(je.get<int>());
        }
    }

    validate_case(c);
    return c;
}

NetworkCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_validation("cannot open case file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::string serialize_case(const NetworkCase& c) {
    json j;
    j["system"] = {{"mva_base", c.system_mva_base}, {"nominal_hz", c.nominal_hz}};
    j["buses"] = json::array();
    for (const auto& b : c.buses) {
        json jb;
        jb["id"] = b.id;
        jb["kind"] = kind_name(b.kind);
        jb["base_kv"] = b.base_kv;
        jb["v_setpoint"] = b.v_setpoint;
        jb["p_load"] = b.p_load * c.system_mva_base;
        jb["q_load"] = b.q_load * c.system_mva_base;
        jb["shunt_g"] = b.shunt_g;
        jb["shunt_b"] = b.shunt_b;
        jb["is_generator_bus"] = b.is_generator_bus;
        j["buses"].push_back(jb);
    }
    j["branches"] = json::array();
    for (const auto& br : c.branches) {
        json jb;
        jb["from_bus"] = br.from_bus;
        jb["to_bus"] = br.to_bus;
        jb["r"] = br.r;
        jb["x"] = br.x;
        jb["b_shunt"] = br.b_shunt;
        jb["tap_ratio"] = br.tap_ratio;
        jb["in_service"] = br.in_service;
        j["branches"].push_back(jb);
    }
    j["generators"] = json::array();
    for (const auto& g : c.generators) {
        json jg;
        jg["bus"] = g.bus;
        jg["mva_base"] = g.mva_base;
        jg["p_set"] = g.p_set * c.system_mva_base;
        jg["h"] = g.h;
        jg["d"] = g.d;
        jg["xd"] = g.xd;
        jg["xq"] = g.xq;
        jg["xd_p"] = g.xd_p;
        jg["xq_p"] = g.xq_p;
        jg["td0_p"] = g.td0_p;
        jg["tq0_p"] = g.tq0_p;
        jg["avr_gain"] = g.avr_gain;
        jg["avr_time"] = g.avr_time;
        jg["efd_min"] = g.efd_min;
        jg["efd_max"] = g.efd_max;
        j["generators"].push_back(jg);
    }
    j["bess_template"] = {
        {"k_es", c.bess_template.k_es},       {"t_es", c.bess_template.t_es},
        {"e_total", c.bess_template.e_total}, {"soc_init", c.bess_template.soc_init},
        {"soc_min", c.bess_template.soc_min}, {"soc_max", c.bess_template.soc_max},
        {"p_max", c.bess_template.p_max}};
    j["placement_exclusions"] = c.placement_exclusions;
    return j.dump(2) + "\n";
}

std::vector<int> candidate_buses(const NetworkCase& c) {
    std::unordered_set<int> excluded(c.placement_exclusions.begin(), c.placement_exclusions.end());
    std::vector<int> out;
    out.reserve(c.buses.size());
    for (const auto& b : c.buses)
        if (!excluded.count(b.id)) out.push_back(b.id);
    return out;
}

void validate_case(const NetworkCase& c) {
    std::unordered_set<int> ids;
    int n_slack = 0;
    for (const auto& b : c.buses) {
        if (!ids.insert(b.id).second)
            fail_validation("duplicate bus id " + std::to_string(b.id));
        if (b.base_kv <= 0.0)
            fail_validation("bus " + std::to_string(b.id) + ": base_kv must be positive");
        if (!std::isfinite(b.p_load) || !std::isfinite(b.q_load))
            fail_validation("bus " + std::to_string(b.id) + ": load must be finite");
        if (b.kind == BusKind::Slack) ++n_slack;
    }
    if (n_slack != 1)
        fail_validation("case must have exactly one slack bus, found " + std::to_string(n_slack));

    for (const auto& br : c.branches) {
        if (br.x == 0.0)
            fail_validation("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + ": x must be nonzero");
        if (br.from_bus == br.to_bus)
            fail_validation("branch endpoints must differ (bus " + std::to_string(br.from_bus) + ")");
        if (!ids.count(br.from_bus) || !ids.count(br.to_bus))
            fail_validation("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " references a missing bus");
    }

    for (const auto& g : c.generators) {
        if (!ids.count(g.bus))
            fail_validation("generator references missing bus " + std::to_string(g.bus));
        if (g.h <= 0.0)
            fail_validation("generator at bus " + std::to_string(g.bus) + ": h must be positive");
        if (g.td0_p <= 0.0)
            fail_validation("generator at bus " + std::to_string(g.bus) + ": td0_p must be positive");
        if (!(g.xd >= g.xd_p && g.xd_p > 0.0))
            fail_validation("generator at bus " + std::to_string(g.bus) + ": need xd >= xd_p > 0");
        if (!(g.efd_min < g.efd_max))
            fail_validation("generator at bus " + std::to_string(g.bus) + ": efd_min must be < efd_max");
    }

    const BessSpec& t = c.bess_template;
    if (!(0.0 <= t.soc_min && t.soc_min < t.soc_init && t.soc_init < t.soc_max && t.soc_max <= 1.0))
        fail_validation("bess_template: need 0 <= soc_min < soc_init < soc_max <= 1");
    if (t.k_es <= 0.0) fail_validation("bess_template: k_es must be positive");
    if (t.t_es <= 0.0) fail_validation("bess_template: t_es must be positive");
    if (t.p_max <= 0.0) fail_validation("bess_template: p_max must be positive");

    for (int ex : c.placement_exclusions)
        if (!ids.count(ex))
            fail_validation("placement_exclusions references missing bus " + std::to_string(ex));

    // connectivity over in-service branches
    std::unordered_map<int, std::vector<int>> adj;
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        adj[br.from_bus].push_back(br.to_bus);
        adj[br.to_bus].push_back(br.from_bus);
    }
    std::unordered_set<int> seen;
    std::queue<int> q;
    q.push(c.buses.front().id);
    seen.insert(c.buses.front().id);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (seen.insert(v).second) q.push(v);
    }
    if (seen.size() != c.buses.size())
        fail_validation("network graph is not connected over in-service branches");
}

}  // namespace bessplace
