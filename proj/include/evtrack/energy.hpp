#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace evtrack {

// Activity classes and their units:
//   mac        executed multiply-accumulates
//   sram_read  bytes read from the weight/activation/bias SRAMs and psum buffer
//   sram_write bytes written
//   register   PE weight-register loads and activation FIFO pushes
//   control    clock cycles (sequencer, clock tree)
struct ActivityCounts {
    int64_t mac = 0;
    int64_t sram_read = 0;
    int64_t sram_write = 0;
    int64_t reg = 0;
    int64_t control = 0;

    ActivityCounts& operator+=(const ActivityCounts& o);
    std::map<std::string, int64_t> by_class() const;
};

struct EnergyBreakdown {
    double mac = 0.0;  // joules
    double sram_read = 0.0;
    double sram_write = 0.0;
    double reg = 0.0;
    double control = 0.0;
    double leakage = 0.0;
    double total() const { return mac + sram_read + sram_write + reg + control + leakage; }
};

inline constexpr int kEnergySchemaVersion = 1;

struct EnergyCoefficients {
    int schema_version = kEnergySchemaVersion;
    std::map<std::string, double> pj;  // activity class -> picojoules per unit
    double leakage_mw = 0.18;
    std::string note;
};

class EnergyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// E = sum(count * coef). Throws EnergyError if a class with a non-zero count
// has no coefficient.
EnergyBreakdown estimate_energy(const ActivityCounts& a, const EnergyCoefficients& c);

EnergyCoefficients load_coefficients(const std::string& path);
EnergyCoefficients coefficients_from_json(const std::string& text);
std::string coefficients_to_json(const EnergyCoefficients& c);

// Path of the shipped frozen coefficients; EVTRACK_COEFFICIENTS overrides.
std::string default_coefficients_path();
EnergyCoefficients load_default_coefficients();

struct CalibrationTarget {
    double energy_per_frame_j = 18.9e-6;  // at the reference sparsity
    double reference_sparsity = 0.40;
    double sparsity_energy_reduction = 0.35;  // E(0) -> E(reference)
};

// Keeps the relative non-MAC coefficients, solves the MAC coefficient for
// the sparsity reduction target, then scales everything to the energy target.
EnergyCoefficients calibrate_coefficients(const ActivityCounts& at_zero, const ActivityCounts& at_reference,
                                          const std::map<std::string, double>& relative,
                                          const CalibrationTarget& target);

std::map<std::string, double> default_relative_coefficients();

}  // namespace evtrack
