#pragma once

#include <complex>
#include <stdexcept>
#include <string>

// Units: hbar = k_B = 1 throughout. Energies are measured in the bare system
// scale (omega_s for bosonic scenarios, eps_up for fermionic ones).

namespace qtherm {

using cplx = std::complex<double>;

enum class Statistics { Bose, Fermi };

inline std::string to_string(Statistics s) {
    return s == Statistics::Bose ? "bose" : "fermi";
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bose-Einstein / Fermi-Dirac occupation 1/(e^{(eps-mu)/T} -+ 1).
// T = 0 is handled as the sharp limit. Bose requires eps > mu.
double occupation(double eps, double T, double mu, Statistics stat);

} // namespace qtherm
