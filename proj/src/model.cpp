#include "mmwg/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mmwg {

namespace {

void check(std::vector<Violation>& out, bool cond, const std::string& path,
           const std::string& msg) {
    if (!cond) out.push_back({path, msg});
}

}  // namespace

ValidationReport validate(const FluxPulse& p) {
    ValidationReport r;
    auto& v = r.violations;
    check(v, p.tau_pulse >= 2.0 * p.tau_buffer, "pulse.tau_pulse",
          "tau_pulse must be >= 2*tau_buffer");
    check(v, p.dt_sample > 0.0, "pulse.dt_sample", "dt_sample must be > 0");
    check(v, p.sigma_filter >= 0.0, "pulse.sigma_filter",
          "sigma_filter must be >= 0");
    check(v, std::abs(p.phi_amplitude) < 0.5, "pulse.phi_amplitude",
          "|phi_amplitude| must be < 0.5");
    return r;
}

ValidationReport validate(const DeviceConfig& c) {
    ValidationReport r;
    auto& v = r.violations;
    const auto& t = c.transmon;
    const auto& w = c.waveguide;

    check(v, t.f_ge_max > t.f_ge_min, "transmon.f_ge_max",
          "f_ge_max must exceed f_ge_min");
    check(v, t.f_ge_min > 0.0, "transmon.f_ge_min", "f_ge_min must be > 0");
    check(v, t.anharmonicity_eta < 0.0, "transmon.anharmonicity_eta",
          "anharmonicity must be negative");
    check(v, t.levels_d >= 2, "transmon.levels_d", "levels_d must be >= 2");
    check(v, t.t1_idle_ge > 0.0, "transmon.t1_idle_ge",
          "coherence times must be > 0");
    check(v, t.t1_idle_ef > 0.0, "transmon.t1_idle_ef",
          "coherence times must be > 0");
    check(v, t.tphi_idle > 0.0, "transmon.tphi_idle",
          "coherence times must be > 0");

    check(v, w.n_cells >= 2, "waveguide.n_cells", "n_cells must be >= 2");
    check(v, w.coupling_site_x0 >= 1 && w.coupling_site_x0 <= w.n_cells,
          "waveguide.coupling_site_x0", "coupling site outside chain");
    check(v, w.hopping_J > 0.0, "waveguide.hopping_J", "hopping_J must be > 0");
    check(v, w.kappa_left >= 0.0, "waveguide.kappa_left",
          "damping rates must be >= 0");
    check(v, w.kappa_right >= 0.0, "waveguide.kappa_right",
          "damping rates must be >= 0");
    check(v, w.g_uc >= 0.0, "waveguide.g_uc", "g_uc must be >= 0");
    check(v, w.gamma_1d >= 0.0, "waveguide.gamma_1d", "gamma_1d must be >= 0");
    check(v, w.band_lo() > 0.0, "waveguide.f_cell",
          "passband must lie at positive frequencies");
    // USS operation requires the passband below the idling frequency.
    check(v, w.band_hi() < t.f_ge_max, "waveguide.f_cell",
          "passband must lie below f_ge_max for USS operation");

    check(v, c.thermal_temperature >= 0.0, "thermal_temperature",
          "temperature must be >= 0");

    if (c.readout_resonator.enabled) {
        check(v, c.readout_resonator.f_r > 0.0, "readout_resonator.f_r",
              "resonator frequency must be > 0");
    }
    return r;
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key()))
            throw ConfigError("unknown config key: " + scope + it.key());
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

DeviceConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    DeviceConfig c;
    reject_unknown_keys(j,
                        {"transmon", "waveguide", "readout_resonator",
                         "thermal_temperature", "rng_seed"},
                        "");
    if (j.contains("transmon")) {
        const auto& t = j["transmon"];
        reject_unknown_keys(t,
                            {"f_ge_max", "f_ge_min", "anharmonicity_eta",
                             "levels_d", "t1_idle_ge", "t1_idle_ef",
                             "tphi_idle"},
                            "transmon.");
        get_if(t, "f_ge_max", c.transmon.f_ge_max);
        get_if(t, "f_ge_min", c.transmon.f_ge_min);
        get_if(t, "anharmonicity_eta", c.transmon.anharmonicity_eta);
        get_if(t, "levels_d", c.transmon.levels_d);
        get_if(t, "t1_idle_ge", c.transmon.t1_idle_ge);
        get_if(t, "t1_idle_ef", c.transmon.t1_idle_ef);
        get_if(t, "tphi_idle", c.transmon.tphi_idle);
    }
    if (j.contains("waveguide")) {
        const auto& w = j["waveguide"];
        reject_unknown_keys(w,
                            {"n_cells", "f_cell", "hopping_J",
                             "coupling_site_x0", "g_uc", "kappa_left",
                             "kappa_right", "gamma_1d"},
                            "waveguide.");
        get_if(w, "n_cells", c.waveguide.n_cells);
        get_if(w, "f_cell", c.waveguide.f_cell);
        get_if(w, "hopping_J", c.waveguide.hopping_J);
        get_if(w, "coupling_site_x0", c.waveguide.coupling_site_x0);
        get_if(w, "g_uc", c.waveguide.g_uc);
        get_if(w, "kappa_left", c.waveguide.kappa_left);
        get_if(w, "kappa_right", c.waveguide.kappa_right);
        get_if(w, "gamma_1d", c.waveguide.gamma_1d);
    }
    if (j.contains("readout_resonator")) {
        const auto& rr = j["readout_resonator"];
        reject_unknown_keys(rr, {"enabled", "f_r", "g_qr", "g_wr"},
                            "readout_resonator.");
        get_if(rr, "enabled", c.readout_resonator.enabled);
        get_if(rr, "f_r", c.readout_resonator.f_r);
        get_if(rr, "g_qr", c.readout_resonator.g_qr);
        get_if(rr, "g_wr", c.readout_resonator.g_wr);
    }
    get_if(j, "thermal_temperature", c.thermal_temperature);
    get_if(j, "rng_seed", c.rng_seed);
    return c;
}

DeviceConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_json(const DeviceConfig& c) {
    json j;
    j["transmon"] = {{"f_ge_max", c.transmon.f_ge_max},
                     {"f_ge_min", c.transmon.f_ge_min},
                     {"anharmonicity_eta", c.transmon.anharmonicity_eta},
                     {"levels_d", c.transmon.levels_d},
                     {"t1_idle_ge", c.transmon.t1_idle_ge},
                     {"t1_idle_ef", c.transmon.t1_idle_ef},
                     {"tphi_idle", c.transmon.tphi_idle}};
    j["waveguide"] = {{"n_cells", c.waveguide.n_cells},
                      {"f_cell", c.waveguide.f_cell},
                      {"hopping_J", c.waveguide.hopping_J},
                      {"coupling_site_x0", c.waveguide.coupling_site_x0},
                      {"g_uc", c.waveguide.g_uc},
                      {"kappa_left", c.waveguide.kappa_left},
                      {"kappa_right", c.waveguide.kappa_right},
                      {"gamma_1d", c.waveguide.gamma_1d}};
    j["readout_resonator"] = {{"enabled", c.readout_resonator.enabled},
                              {"f_r", c.readout_resonator.f_r},
                              {"g_qr", c.readout_resonator.g_qr},
                              {"g_wr", c.readout_resonator.g_wr}};
    j["thermal_temperature"] = c.thermal_temperature;
    j["rng_seed"] = c.rng_seed;
    // nlohmann::json orders object keys lexicographically, which makes the
    // dump canonical regardless of insertion order.
    return j.dump();
}

std::uint64_t config_hash(const DeviceConfig& c) {
    // FNV-1a over the canonical serialization.
    const std::string s = canonical_json(c);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace mmwg
