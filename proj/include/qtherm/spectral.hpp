#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qtherm/quadrature.hpp"
#include "qtherm/types.hpp"

namespace qtherm::spectral {

enum class Kind { Ohmic, Lorentzian, Tabulated };

// Reservoir coupling spectrum J(omega) >= 0 on its declared support.
//   Ohmic:      J = eta * w * exp(-w/omega_c) on [0, inf)
//   Lorentzian: J = gamma * d^2 / ((w-center)^2 + d^2) on (-inf, inf)
//   Tabulated:  linear interpolation of a nonnegative two-column table
struct SpectralDensity {
    Kind kind{Kind::Ohmic};
    double eta{0.0};
    double omega_c{1.0};
    double gamma{0.0};
    double halfwidth{1.0};
    double center{0.0};
    std::vector<double> tab_w, tab_j;
    // PV / kernel integrals run over [lower_edge, upper_cutoff]; the tail
    // beyond the default cutoff is < 1e-10 of the integral for both families.
    double cutoff_scale{50.0};

    static SpectralDensity ohmic(double eta, double omega_c);
    static SpectralDensity lorentzian(double gamma, double halfwidth,
                                      double center = 0.0);
    static SpectralDensity tabulated(std::vector<double> w, std::vector<double> j);
    // Two-column CSV (frequency, value), ascending frequency, header row required.
    static SpectralDensity tabulated_from_csv(const std::string& path);

    double operator()(double w) const;

    bool zero_coupling() const;
    double lower_edge() const;   // support infimum used for integration
    double upper_cutoff() const; // integration cutoff
    // True if J vanishes identically below the support edge (bound states can
    // live there).
    bool has_gap_below() const;
};

// g(dt) = int J(w) e^{-i w dt} dw. Closed form for Ohmic and Lorentzian,
// adaptive quadrature otherwise.
cplx memory_kernel(const SpectralDensity& sd, double dt);

// d/d(dt) of the memory kernel (used for analytic second derivatives of u).
cplx memory_kernel_derivative(const SpectralDensity& sd, double dt);

// g~(dt) = int J(w) f(w, T0, mu0) e^{-i w dt} dw for one reservoir.
cplx noise_kernel(const SpectralDensity& sd, Statistics stat, double T0,
                  double mu0, double dt);

// Level shift Delta(w): principal value of int J(w')/(w-w') dw' inside the
// support (singularity subtraction), ordinary integral outside. Closed forms
// are used for the Ohmic and Lorentzian families.
double self_energy_shift(const SpectralDensity& sd, double w);

// Reference implementation of the shift by direct subtracted quadrature;
// closed forms are validated against it in the tests.
double self_energy_shift_quadrature(const SpectralDensity& sd, double w,
                                    double abs_tol = quad::kDefaultAbsTol);

struct SelfEnergy {
    double delta; // real shift Delta(w)
    double j;     // J(w); pi*J is the half-width of Sigma = Delta - i pi J
};
SelfEnergy self_energy(const SpectralDensity& sd, double w);

// d Delta / d w, nonsingular only outside the support (used for residues).
double self_energy_shift_derivative(const SpectralDensity& sd, double w);

// Continuum spectral function D(w) = J / ((w - w_s - Delta)^2 + pi^2 J^2).
// A localized bound state contributes a separate delta peak (see BoundState).
double spectral_function(const SpectralDensity& sd, double omega_s, double w);

struct BoundState {
    double omega_b; // localized-mode frequency, J(omega_b) = 0
    double residue; // Z(omega_b) = 1/(1 - Delta'(omega_b)), in (0, 1]
};

// Root of y(w) = w - omega_s - Delta(w) on the J = 0 region below the support,
// or nullopt when no localized mode exists.
std::optional<BoundState> find_bound_state(const SpectralDensity& sd,
                                           double omega_s,
                                           double root_tol = 1e-13);

// int D(w) dw over the continuum support (sums with the bound-state residue
// to 1).
double spectral_weight(const SpectralDensity& sd, double omega_s,
                       double abs_tol = 1e-9);

// Frequency of the resonance peak: root of w - omega_s - Delta(w) inside the
// support (the steady-state renormalized level when no bound state exists).
double resonance_frequency(const SpectralDensity& sd, double omega_s);

} // namespace qtherm::spectral
