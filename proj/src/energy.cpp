#include "evtrack/energy.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#ifndef EVTRACK_DEFAULT_COEFFICIENTS
#define EVTRACK_DEFAULT_COEFFICIENTS "data/energy_coefficients.json"
#endif

namespace evtrack {

using nlohmann::json;

ActivityCounts& ActivityCounts::operator+=(const ActivityCounts& o) {
    mac += o.mac;
    sram_read += o.sram_read;
    sram_write += o.sram_write;
    reg += o.reg;
    control += o.control;
    return *this;
}

std::map<std::string, int64_t> ActivityCounts::by_class() const {
    return {{"mac", mac}, {"sram_read", sram_read}, {"sram_write", sram_write}, {"register", reg}, {"control", control}};
}

EnergyBreakdown estimate_energy(const ActivityCounts& a, const EnergyCoefficients& c) {
    auto term = [&](const char* cls, int64_t count) {
        auto it = c.pj.find(cls);
        if (it == c.pj.end()) {
            if (count == 0) return 0.0;
            throw EnergyError(std::string("no energy coefficient for activity class '") + cls + "'");
        }
        return static_cast<double>(count) * it->second * 1e-12;
    };
    EnergyBreakdown e;
    e.mac = term("mac", a.mac);
    e.sram_read = term("sram_read", a.sram_read);
    e.sram_write = term("sram_write", a.sram_write);
    e.reg = term("register", a.reg);
    e.control = term("control", a.control);
    return e;
}

EnergyCoefficients coefficients_from_json(const std::string& text) {
    EnergyCoefficients c;
    try {
        const json j = json::parse(text);
        c.schema_version = j.at("schema_version").get<int>();
        if (c.schema_version != kEnergySchemaVersion) {
            throw EnergyError("unsupported coefficient schema_version " + std::to_string(c.schema_version));
        }
        if (j.value("units", std::string("pJ")) != "pJ") throw EnergyError("coefficients must be in pJ");
        for (const auto& [k, v] : j.at("coefficients").items()) c.pj[k] = v.get<double>();
        c.leakage_mw = j.value("leakage_mw", c.leakage_mw);
        c.note = j.value("note", std::string());
    } catch (const json::exception& e) {
        throw EnergyError(std::string("coefficient file: ") + e.what());
    }
    return c;
}

std::string coefficients_to_json(const EnergyCoefficients& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["units"] = "pJ";
    j["coefficients"] = c.pj;
    j["leakage_mw"] = c.leakage_mw;
    if (!c.note.empty()) j["note"] = c.note;
    return j.dump(2) + "\n";
}

EnergyCoefficients load_coefficients(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EnergyError("cannot open coefficient file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return coefficients_from_json(ss.str());
}

std::string default_coefficients_path() {
    if (const char* env = std::getenv("EVTRACK_COEFFICIENTS"); env && *env) return env;
    return EVTRACK_DEFAULT_COEFFICIENTS;
}

EnergyCoefficients load_default_coefficients() { return load_coefficients(default_coefficients_path()); }

std::map<std::string, double> default_relative_coefficients() {
    // Per unit, relative to one SRAM byte read.
    return {{"sram_read", 1.0}, {"sram_write", 1.25}, {"register", 0.08}, {"control", 3.0}};
}

EnergyCoefficients calibrate_coefficients(const ActivityCounts& a0, const ActivityCounts& a1,
                                          const std::map<std::string, double>& rel, const CalibrationTarget& t) {
    EnergyCoefficients probe;
    probe.pj = rel;
    probe.pj["mac"] = 0.0;
    const double o0 = estimate_energy(a0, probe).total() * 1e12;
    const double o1 = estimate_energy(a1, probe).total() * 1e12;
    const double m0 = static_cast<double>(a0.mac);
    const double m1 = static_cast<double>(a1.mac);
    const double r = t.sparsity_energy_reduction;
    const double denom = (1.0 - r) * m0 - m1;
    const double mac = (r * o0 - (o0 - o1)) / denom;
    if (!(denom > 0.0) || !(mac > 0.0)) {
        throw EnergyError("calibration has no positive MAC coefficient for the requested sparsity reduction");
    }
    const double e1 = mac * m1 + o1;
    const double scale = t.energy_per_frame_j * 1e12 / e1;
    EnergyCoefficients out;
    for (const auto& [k, v] : rel) out.pj[k] = v * scale;
    out.pj["mac"] = mac * scale;
    return out;
}

}  // namespace evtrack
