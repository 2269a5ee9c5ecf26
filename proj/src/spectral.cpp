#include "qtherm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/special_functions/expint.hpp>

namespace qtherm {

double occupation(double eps, double T, double mu, Statistics stat) {
    const double x = eps - mu;
    if (stat == Statistics::Bose) {
        if (x <= 0.0)
            throw std::domain_error("bose occupation requires eps > mu");
        if (T <= 0.0) return 0.0;
        const double a = x / T;
        // 1/(e^a - 1), stable for both small and large a
        return a > 700.0 ? 0.0 : 1.0 / std::expm1(a);
    }
    if (T <= 0.0) return x < 0.0 ? 1.0 : (x > 0.0 ? 0.0 : 0.5);
    const double a = x / T;
    if (a > 700.0) return 0.0;
    if (a < -700.0) return 1.0;
    return 1.0 / (std::exp(a) + 1.0);
}

} // namespace qtherm

namespace qtherm::spectral {

SpectralDensity SpectralDensity::ohmic(double eta, double omega_c) {
    if (eta < 0.0 || omega_c <= 0.0)
        throw std::invalid_argument("ohmic: eta >= 0 and omega_c > 0 required");
    SpectralDensity sd;
    sd.kind = Kind::Ohmic;
    sd.eta = eta;
    sd.omega_c = omega_c;
    return sd;
}

SpectralDensity SpectralDensity::lorentzian(double gamma, double halfwidth,
                                            double center) {
    if (gamma < 0.0 || halfwidth <= 0.0)
        throw std::invalid_argument("lorentzian: gamma >= 0 and d > 0 required");
    SpectralDensity sd;
    sd.kind = Kind::Lorentzian;
    sd.gamma = gamma;
    sd.halfwidth = halfwidth;
    sd.center = center;
    return sd;
}

SpectralDensity SpectralDensity::tabulated(std::vector<double> w,
                                           std::vector<double> j) {
    if (w.size() != j.size() || w.size() < 2)
        throw std::invalid_argument("tabulated: need >= 2 matching samples");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i > 0 && w[i] <= w[i - 1])
            throw std::invalid_argument("tabulated: frequencies must ascend");
        if (j[i] < 0.0)
            throw std::invalid_argument("tabulated: J values must be >= 0");
    }
    SpectralDensity sd;
    sd.kind = Kind::Tabulated;
    sd.tab_w = std::move(w);
    sd.tab_j = std::move(j);
    return sd;
}

SpectralDensity SpectralDensity::tabulated_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spectral density file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("spectral density CSV is empty: " + path);
    // header row required
    std::vector<double> w, j;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'frequency,value'");
        w.push_back(std::stod(a));
        j.push_back(std::stod(b));
    }
    return tabulated(std::move(w), std::move(j));
}

double SpectralDensity::operator()(double w) const {
    switch (kind) {
        case Kind::Ohmic:
            return w > 0.0 ? eta * w * std::exp(-w / omega_c) : 0.0;
        case Kind::Lorentzian: {
            const double x = w - center;
            return gamma * halfwidth * halfwidth / (x * x + halfwidth * halfwidth);
        }
        case Kind::Tabulated: {
            if (w < tab_w.front() || w > tab_w.back())
                throw std::out_of_range("tabulated J(w): frequency outside grid");
            auto it = std::upper_bound(tab_w.begin(), tab_w.end(), w);
            if (it == tab_w.end()) return tab_j.back();
            const auto i = static_cast<std::size_t>(it - tab_w.begin());
            if (i == 0) return tab_j.front();
            const double f = (w - tab_w[i - 1]) / (tab_w[i] - tab_w[i - 1]);
            return (1.0 - f) * tab_j[i - 1] + f * tab_j[i];
        }
    }
    return 0.0;
}

bool SpectralDensity::zero_coupling() const {
    switch (kind) {
        case Kind::Ohmic: return eta == 0.0;
        case Kind::Lorentzian: return gamma == 0.0;
        case Kind::Tabulated:
            return std::all_of(tab_j.begin(), tab_j.end(),
                               [](double x) { return x == 0.0; });
    }
    return true;
}

double SpectralDensity::lower_edge() const {
    switch (kind) {
        case Kind::Ohmic: return 0.0;
        case Kind::Lorentzian: return center - cutoff_scale * halfwidth;
        case Kind::Tabulated: return tab_w.front();
    }
    return 0.0;
}

double SpectralDensity::upper_cutoff() const {
    switch (kind) {
        case Kind::Ohmic: return cutoff_scale * omega_c;
        case Kind::Lorentzian: return center + cutoff_scale * halfwidth;
        case Kind::Tabulated: return tab_w.back();
    }
    return 0.0;
}

bool SpectralDensity::has_gap_below() const {
    switch (kind) {
        case Kind::Ohmic: return true;
        case Kind::Lorentzian: return false;
        case Kind::Tabulated: return true; // J == 0 below tab_w.front()
    }
    return false;
}

cplx memory_kernel(const SpectralDensity& sd, double dt) {
    if (!std::isfinite(dt)) throw std::invalid_argument("memory_kernel: dt not finite");
    switch (sd.kind) {
        case Kind::Ohmic: {
            // int_0^inf eta w e^{-w/wc} e^{-i w dt} dw = eta wc^2/(1 + i wc dt)^2
            const cplx z(1.0, sd.omega_c * dt);
            return sd.eta * sd.omega_c * sd.omega_c / (z * z);
        }
        case Kind::Lorentzian: {
            // contour integral: pi Gamma d e^{-d |dt|} e^{-i center dt}
            return M_PI * sd.gamma * sd.halfwidth * std::exp(-sd.halfwidth * std::abs(dt)) *
                   std::polar(1.0, -sd.center * dt);
        }
        case Kind::Tabulated: {
            const auto f = [&](double w) {
                return sd(w) * std::polar(1.0, -w * dt);
            };
            return quad::adaptive_simpson(f, sd.lower_edge(), sd.upper_cutoff());
        }
    }
    return {};
}

cplx memory_kernel_derivative(const SpectralDensity& sd, double dt) {
    switch (sd.kind) {
        case Kind::Ohmic: {
            const cplx z(1.0, sd.omega_c * dt);
            const double wc = sd.omega_c;
            return cplx(0.0, -2.0) * sd.eta * wc * wc * wc / (z * z * z);
        }
        case Kind::Lorentzian: {
            const double sgn = dt >= 0.0 ? 1.0 : -1.0;
            return (-sgn * sd.halfwidth - cplx(0.0, 1.0) * sd.center) *
                   memory_kernel(sd, dt);
        }
        case Kind::Tabulated: {
            const auto f = [&](double w) {
                return cplx(0.0, -w) * sd(w) * std::polar(1.0, -w * dt);
            };
            return quad::adaptive_simpson(f, sd.lower_edge(), sd.upper_cutoff());
        }
    }
    return {};
}

cplx noise_kernel(const SpectralDensity& sd, Statistics stat, double T0,
                  double mu0, double dt) {
    if (T0 < 0.0) throw std::invalid_argument("noise_kernel: T0 >= 0 required");
    if (stat == Statistics::Bose) {
        if (T0 == 0.0) return {0.0, 0.0};
        if (mu0 > sd.lower_edge())
            throw ConfigError("bosonic noise kernel: mu0 must lie below the "
                              "support (distribution diverges inside it)");
    }
    const double a = sd.lower_edge(), b = sd.upper_cutoff();
    const auto f = [&](double w) -> cplx {
        double phi;
        if (stat == Statistics::Bose && w <= mu0) {
            phi = 0.0; // J vanishes at the edge faster than n diverges
        } else if (stat == Statistics::Bose && sd.kind == Kind::Ohmic &&
                   mu0 == 0.0 && w < 1e-12) {
            phi = sd.eta * T0; // limit of J(w) n(w,T0) as w -> 0+
        } else {
            phi = sd(w) * occupation(w, T0, mu0, stat);
        }
        return phi * std::polar(1.0, -w * dt);
    };
    return quad::adaptive_simpson(f, std::max(a, stat == Statistics::Bose ? mu0 : a), b);
}

namespace {

// Ohmic closed form: Delta(w) = eta * (-wc + w e^{-w/wc} Ei(w/wc)).
double ohmic_shift(double eta, double wc, double w) {
    if (w == 0.0) return -eta * wc;
    const double x = w / wc;
    return eta * (-wc + w * std::exp(-x) * boost::math::expint(x));
}

double lorentzian_shift(double gamma, double d, double center, double w) {
    const double x = w - center;
    return M_PI * gamma * d * x / (x * x + d * d);
}

} // namespace

double self_energy_shift(const SpectralDensity& sd, double w) {
    switch (sd.kind) {
        case Kind::Ohmic: return ohmic_shift(sd.eta, sd.omega_c, w);
        case Kind::Lorentzian:
            return lorentzian_shift(sd.gamma, sd.halfwidth, sd.center, w);
        case Kind::Tabulated: return self_energy_shift_quadrature(sd, w);
    }
    return 0.0;
}

double self_energy_shift_quadrature(const SpectralDensity& sd, double w,
                                    double abs_tol) {
    const double a = sd.lower_edge();
    const double b = sd.upper_cutoff();
    if (w <= a || w >= b) {
        const auto f = [&](double wp) { return sd(wp) / (w - wp); };
        return quad::adaptive_simpson(f, a, b, abs_tol);
    }
    // singularity subtraction:
    //   P int J(w')/(w-w') = int [J(w') - J(w)]/(w-w') + J(w) ln|(w-a)/(b-w)|
    const double Jw = sd(w);
    const auto f = [&](double wp) {
        const double dwp = w - wp;
        if (std::abs(dwp) < 1e-9) {
            // limit -J'(w) by a symmetric difference
            const double h = 1e-6 * std::max(1.0, std::abs(w));
            return -(sd(w + h) - sd(w - h)) / (2.0 * h);
        }
        return (sd(wp) - Jw) / dwp;
    };
    const double reg = quad::adaptive_simpson_split(f, a, b, {w}, abs_tol);
    return reg + Jw * std::log(std::abs((w - a) / (b - w)));
}

SelfEnergy self_energy(const SpectralDensity& sd, double w) {
    return {self_energy_shift(sd, w), sd.kind == Kind::Ohmic && w <= 0.0 ? 0.0 : sd(w)};
}

double self_energy_shift_derivative(const SpectralDensity& sd, double w) {
    // dDelta/dw = -int J(w')/(w-w')^2 dw', valid off the support
    const auto f = [&](double wp) {
        const double d = w - wp;
        return -sd(wp) / (d * d);
    };
    return quad::adaptive_simpson(f, sd.lower_edge(), sd.upper_cutoff(), 1e-12);
}

double spectral_function(const SpectralDensity& sd, double omega_s, double w) {
    double Jw;
    if (sd.kind == Kind::Ohmic && w <= 0.0) return 0.0;
    if (sd.kind == Kind::Tabulated && (w < sd.tab_w.front() || w > sd.tab_w.back()))
        return 0.0;
    Jw = sd(w);
    if (Jw == 0.0) return 0.0;
    const double y = w - omega_s - self_energy_shift(sd, w);
    return Jw / (y * y + M_PI * M_PI * Jw * Jw);
}

std::optional<BoundState> find_bound_state(const SpectralDensity& sd,
                                           double omega_s, double root_tol) {
    if (!sd.has_gap_below() || sd.zero_coupling()) return std::nullopt;
    const double edge = sd.kind == Kind::Ohmic ? 0.0 : sd.lower_edge();
    const auto y = [&](double w) { return w - omega_s - self_energy_shift(sd, w); };
    // Delta is bounded below by -eta*wc for Ohmic; scale the bracket similarly
    // for tabulated densities from the total J mass.
    double reach;
    if (sd.kind == Kind::Ohmic) {
        reach = 10.0 * sd.eta * sd.omega_c + omega_s;
    } else {
        const double mass = quad::adaptive_simpson(
            [&](double w) { return sd(w); }, sd.lower_edge(), sd.upper_cutoff(), 1e-9);
        reach = 10.0 * mass / std::max(1e-12, omega_s) + omega_s + 1.0;
    }
    const double lo = edge - reach;
    const double eps = 1e-12 * std::max(1.0, std::abs(edge) + omega_s);
    const double hi = edge - eps;
    double ylo = y(lo), yhi = y(hi);
    if (ylo * yhi > 0.0) return std::nullopt; // no sign change: no localized mode
    // bisection + secant polish (Delta is smooth and monotone off support)
    double a = lo, b = hi, fa = ylo;
    for (int it = 0; it < 200 && (b - a) > root_tol; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = y(m);
        if (fa * fm <= 0.0) {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    BoundState bs;
    bs.omega_b = 0.5 * (a + b);
    const double dD = self_energy_shift_derivative(sd, bs.omega_b);
    bs.residue = 1.0 / (1.0 - dD);
    return bs;
}

double resonance_frequency(const SpectralDensity& sd, double omega_s) {
    const auto y = [&](double w) { return w - omega_s - self_energy_shift(sd, w); };
    // scan for a sign change inside the support
    const double a = sd.lower_edge(), b = sd.upper_cutoff();
    const int n = 4000;
    double prev_w = a + (b - a) * 1e-9, prev_y = y(prev_w);
    for (int i = 1; i <= n; ++i) {
        const double w = a + (b - a) * (static_cast<double>(i) / n);
        const double yw = y(w);
        if (prev_y * yw <= 0.0) {
            double lo = prev_w, hi = w, flo = prev_y;
            for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
                const double m = 0.5 * (lo + hi), fm = y(m);
                if (flo * fm <= 0.0) {
                    hi = m;
                } else {
                    lo = m;
                    flo = fm;
                }
            }
            return 0.5 * (lo + hi);
        }
        prev_w = w;
        prev_y = yw;
    }
    throw SolverError("resonance_frequency: no root of w - omega_s - Delta(w) "
                      "inside the support");
}

double spectral_weight(const SpectralDensity& sd, double omega_s, double abs_tol) {
    const double a = sd.lower_edge(), b = sd.upper_cutoff();
    std::vector<double> breaks;
    try {
        const double wr = resonance_frequency(sd, omega_s);
        const double width = M_PI * std::max(sd(wr), 1e-12);
        breaks = {wr - 8.0 * width, wr, wr + 8.0 * width};
    } catch (const SolverError&) {
        // no resonance crossing (e.g. past the bound-state threshold)
    }
    const auto f = [&](double w) { return spectral_function(sd, omega_s, w); };
    return quad::adaptive_simpson_split(f, std::max(a, a == 0.0 ? 1e-13 : a), b,
                                        breaks, abs_tol);
}

} // namespace qtherm::spectral
