#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qtherm/spectral.hpp"
#include "qtherm/types.hpp"

namespace qtherm::greenfn {

struct TimeGrid {
    double t0{0.0};
    double dt{0.01};
    int n_steps{0};

    TimeGrid() = default;
    TimeGrid(double t0_, double dt_, int n_steps_) : t0(t0_), dt(dt_), n_steps(n_steps_) {
        if (dt <= 0.0 || n_steps < 1)
            throw std::invalid_argument("TimeGrid: dt > 0 and n_steps >= 1 required");
    }
    double t(int k) const { return t0 + dt * k; }
    int size() const { return n_steps + 1; }
};

struct SystemSpec {
    Statistics stat{Statistics::Bose};
    std::vector<double> levels; // bare energies eps_i

    int dim() const { return static_cast<int>(levels.size()); }
    void validate() const;
};

struct ReservoirSpec {
    Statistics stat{Statistics::Bose};
    double T0{0.0};
    double mu0{0.0};
    spectral::SpectralDensity sd;

    void validate(const SystemSpec& sys) const;
};

// Propagator u(t_k, t0) and equal-time correlation v(t_k, t_k), stored per
// level: the reservoir coupling is level-diagonal (the only structure the
// paper's scenarios use), so the matrix Dyson equation decomposes into scalar
// Volterra problems. u(t0,t0) = 1, |u| <= 1 + solver tolerance.
struct GreenFunctionSet {
    TimeGrid grid;
    int dim{1};
    Statistics stat{Statistics::Bose};
    std::vector<std::vector<cplx>> u;     // [level][time]
    std::vector<std::vector<cplx>> udot;  // analytic Dyson right-hand side
    std::vector<std::vector<cplx>> uddot; // analytic second derivative
    std::vector<std::vector<double>> v;   // real for diagonal coupling
    int steady_index{-1};                 // first index of the detected plateau
    double recurrence_horizon{0.0};       // 0 unless produced by the oracle

    bool has_v() const { return !v.empty(); }
    bool thermalized() const { return steady_index >= 0; }
    Eigen::MatrixXcd u_matrix(int k) const;
    Eigen::MatrixXcd v_matrix(int k) const;
    // n(t_k) = u n0 u^dag + v
    Eigen::MatrixXcd occupation(int k, const Eigen::MatrixXcd& n0) const;
};

struct SolveOptions {
    bool want_v{true};
    bool want_uddot{true};
    double steady_tol{1e-6};    // relative plateau change over the window
    double steady_window{5.0};  // trailing window length (time units)
    bool stop_at_steady{false}; // truncate the grid once the plateau is hit
    // initial occupations used by the steady-state detector
    Eigen::MatrixXcd n0;
    double norm_guard{1e-3};    // |u| > 1 + guard aborts with a dt suggestion
};

// Solves du/dt + i eps u + int_{t0}^{t} g(t-tau) u(tau) dtau = 0 by
// second-order product-integration trapezoid with one predictor-corrector
// pass per step, on the integrating-factor form u = e^{-i eps (t-t0)} w so
// that zero coupling is exact to machine precision. Fills v(t,t) from the
// cached u rows and the noise kernel in the same O(n_steps^2) sweep.
GreenFunctionSet solve(const SystemSpec& sys,
                       const std::vector<ReservoirSpec>& reservoirs,
                       const TimeGrid& grid, const SolveOptions& opts = {});

// Frequency-domain steady state n(inf) = int D(w) fbar(w) dw for one level,
// with fbar the J-weighted mix of the reservoir distributions (Eq. 16a form).
// Refuses when a localized bound state exists (no thermalization).
double steady_occupation_spectral(const std::vector<ReservoirSpec>& reservoirs,
                                  double level, double abs_tol = 1e-9);

// Steady-state renormalized level: resonance root of w - eps - Delta_tot(w).
double steady_level_spectral(const std::vector<ReservoirSpec>& reservoirs,
                             double level);

// Combined bound-state search over the summed reservoir spectrum.
std::optional<spectral::BoundState>
combined_bound_state(const std::vector<ReservoirSpec>& reservoirs, double level);

// Noise-kernel lattice G(m) = sum_alpha g~_alpha(m dt), m = 0..n (Filon).
std::vector<cplx> noise_kernel_lattice(const std::vector<ReservoirSpec>& reservoirs,
                                       double dt, int n);

// Memory-kernel lattice g(m dt) summed over reservoirs.
std::vector<cplx> memory_kernel_lattice(const std::vector<ReservoirSpec>& reservoirs,
                                        double dt, int n);

} // namespace qtherm::greenfn
