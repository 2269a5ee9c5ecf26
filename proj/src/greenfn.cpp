#include "qtherm/greenfn.hpp"

#include <cmath>
#include <sstream>

namespace qtherm::greenfn {

void SystemSpec::validate() const {
    if (levels.empty()) throw ConfigError("system: at least one level required");
    for (double e : levels)
        if (!std::isfinite(e)) throw ConfigError("system: level energies must be finite");
}

void ReservoirSpec::validate(const SystemSpec& sys) const {
    if (stat != sys.stat)
        throw ConfigError("reservoir statistics must match the system");
    if (T0 < 0.0) throw ConfigError("reservoir: T0 >= 0 required");
    if (stat == Statistics::Bose && T0 > 0.0 && mu0 > sd.lower_edge())
        throw ConfigError("bosonic reservoir: mu0 must lie below the spectral "
                          "support");
}

Eigen::MatrixXcd GreenFunctionSet::u_matrix(int k) const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) m(i, i) = u[i][k];
    return m;
}

Eigen::MatrixXcd GreenFunctionSet::v_matrix(int k) const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    if (!v.empty())
        for (int i = 0; i < dim; ++i) m(i, i) = v[i][k];
    return m;
}

Eigen::MatrixXcd GreenFunctionSet::occupation(int k, const Eigen::MatrixXcd& n0) const {
    const Eigen::MatrixXcd uk = u_matrix(k);
    return uk * n0 * uk.adjoint() + v_matrix(k);
}

std::vector<cplx> memory_kernel_lattice(const std::vector<ReservoirSpec>& reservoirs,
                                        double dt, int n) {
    std::vector<cplx> g(n + 1, cplx{0.0, 0.0});
    for (const auto& r : reservoirs) {
        if (r.sd.zero_coupling()) continue;
        if (r.sd.kind == spectral::Kind::Tabulated) {
            // one Filon pass over the table instead of n adaptive quadratures
            std::vector<quad::FourierSegment> segs = {
                {r.sd.lower_edge(), r.sd.upper_cutoff(),
                 std::max<int>(400, static_cast<int>(r.sd.tab_w.size()) * 4)}};
            auto lat = quad::fourier_lattice([&](double w) { return r.sd(w); },
                                             segs, 0.0, dt, n + 1);
            for (int m = 0; m <= n; ++m) g[m] += lat[m];
        } else {
            for (int m = 0; m <= n; ++m) g[m] += spectral::memory_kernel(r.sd, m * dt);
        }
    }
    return g;
}

namespace {

std::vector<quad::FourierSegment> noise_segments(const ReservoirSpec& r) {
    const double a = r.sd.lower_edge(), b = r.sd.upper_cutoff();
    std::vector<double> cuts = {a, b};
    // resolve the distribution feature around mu0 (step of width ~T0)
    if (r.stat == Statistics::Fermi) {
        const double w = std::max(25.0 * r.T0, 1e-3);
        cuts.push_back(std::clamp(r.mu0 - w, a, b));
        cuts.push_back(std::clamp(r.mu0 + w, a, b));
    } else if (r.T0 > 0.0 && r.T0 < 1.0) {
        // cold bosonic bath: the occupation decays within ~T0 of the edge
        cuts.push_back(std::clamp(r.mu0 + 30.0 * r.T0, a, b));
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<quad::FourierSegment> segs;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        if (hi - lo < 1e-12) continue;
        // panel width: fine across the Fermi step, moderate elsewhere
        double hmax = (hi - lo) / 64.0;
        if (lo >= r.mu0 - 26.0 * std::max(r.T0, 0.04) &&
            hi <= r.mu0 + 31.0 * std::max(r.T0, 0.04))
            hmax = std::min(hmax, std::max(r.T0 / 4.0, 1e-4));
        hmax = std::min(hmax, (b - a) / 512.0);
        const int p = std::max(4, static_cast<int>(std::ceil((hi - lo) / hmax)));
        segs.push_back({lo, hi, p});
    }
    return segs;
}

} // namespace

std::vector<cplx> noise_kernel_lattice(const std::vector<ReservoirSpec>& reservoirs,
                                       double dt, int n) {
    std::vector<cplx> g(n + 1, cplx{0.0, 0.0});
    for (const auto& r : reservoirs) {
        if (r.sd.zero_coupling()) continue;
        if (r.stat == Statistics::Bose && r.T0 == 0.0) continue;
        const auto phi = [&](double w) -> double {
            if (r.stat == Statistics::Bose && w <= r.mu0) return 0.0;
            if (r.stat == Statistics::Bose && r.sd.kind == spectral::Kind::Ohmic &&
                r.mu0 == 0.0 && w < 1e-12)
                return r.sd.eta * r.T0;
            return r.sd(w) * occupation(w, r.T0, r.mu0, r.stat);
        };
        auto lat = quad::fourier_lattice(phi, noise_segments(r), 0.0, dt, n + 1);
        for (int m = 0; m <= n; ++m) g[m] += lat[m];
    }
    return g;
}

namespace {

// Scalar Volterra solve for one level on the integrating-factor lattice.
struct LevelSolver {
    double eps, dt;
    int n_max;
    const std::vector<cplx>& g;  // g(m dt), summed over reservoirs
    const std::vector<cplx>& gd; // g'(m dt)
    const std::vector<cplx>* gt; // noise lattice, optional

    std::vector<cplx> w;    // transformed propagator, w(0) = 1
    std::vector<cplx> rhs;  // dw/dt = -conv
    std::vector<cplx> k;    // g(m dt) e^{+i eps m dt}
    std::vector<cplx> kd;   // d/ds [g(s) e^{i eps s}]
    std::vector<cplx> u, ud, udd;
    std::vector<double> v;
    std::vector<cplx> S;     // correlation partial sums
    std::vector<cplx> Gfull; // noise kernel, index n_max + m

    LevelSolver(double eps_, double dt_, int n_max_, const std::vector<cplx>& g_,
                const std::vector<cplx>& gd_, const std::vector<cplx>* gt_)
        : eps(eps_), dt(dt_), n_max(n_max_), g(g_), gd(gd_), gt(gt_) {
        k.resize(n_max + 1);
        kd.resize(n_max + 1);
        for (int m = 0; m <= n_max; ++m) {
            const cplx ph = std::polar(1.0, eps * m * dt);
            k[m] = g[m] * ph;
            kd[m] = (gd[m] + cplx(0.0, eps) * g[m]) * ph;
        }
        w.assign(n_max + 1, cplx{});
        rhs.assign(n_max + 1, cplx{});
        u.assign(n_max + 1, cplx{});
        ud.assign(n_max + 1, cplx{});
        udd.assign(n_max + 1, cplx{});
        w[0] = 1.0;
        rhs[0] = 0.0;
        u[0] = 1.0;
        ud[0] = cplx(0.0, -eps);
        udd[0] = cplx(0.0, -eps) * ud[0] - g[0];
        if (gt) {
            v.assign(n_max + 1, 0.0);
            S.assign(n_max + 1, cplx{});
            Gfull.assign(2 * n_max + 1, cplx{});
            for (int m = 0; m <= n_max; ++m) {
                Gfull[n_max + m] = (*gt)[m];
                Gfull[n_max - m] = std::conj((*gt)[m]);
            }
            S[0] = Gfull[n_max] * std::conj(u[0]);
        }
    }

    // trapezoid convolution of k with w at step n, endpoint value supplied
    cplx conv_tail(int n) const {
        cplx acc = 0.5 * k[n] * w[0];
        for (int j = 1; j < n; ++j) acc += k[n - j] * w[j];
        return acc;
    }

    void advance(int n) { // computes index n+1 entries
        const cplx tail = conv_tail(n + 1);
        const cplx wp = w[n] + dt * rhs[n]; // Euler predictor
        const cplx rhs_p = -dt * (tail + 0.5 * k[0] * wp);
        const cplx w1 = w[n] + 0.5 * dt * (rhs[n] + rhs_p);
        rhs[n + 1] = -dt * (tail + 0.5 * k[0] * w1); // one corrector pass
        w[n + 1] = w[n] + 0.5 * dt * (rhs[n] + rhs[n + 1]);

        const cplx ph = std::polar(1.0, -eps * (n + 1) * dt);
        u[n + 1] = ph * w[n + 1];
        ud[n + 1] = ph * (rhs[n + 1] - cplx(0.0, eps) * w[n + 1]);

        // w'' = -k(0) w - int k'(t-tau) w(tau), then map back
        cplx cd = 0.5 * kd[n + 1] * w[0] + 0.5 * kd[0] * w[n + 1];
        for (int j = 1; j <= n; ++j) cd += kd[n + 1 - j] * w[j];
        const cplx wdd = -k[0] * w[n + 1] - dt * cd;
        udd[n + 1] =
            ph * (wdd - 2.0 * cplx(0.0, eps) * rhs[n + 1] - eps * eps * w[n + 1]);

        if (gt) {
            const int m = n + 1;
            const cplx ucm = std::conj(u[m]);
            // new column a = m, then append row b = m to every column
            cplx sm{};
            for (int b = 0; b < m; ++b) sm += Gfull[n_max + b - m] * std::conj(u[b]);
            S[m] = sm + Gfull[n_max] * ucm;
            for (int a = 0; a < m; ++a) S[a] += Gfull[n_max + m - a] * ucm;
            cplx acc{};
            const cplx uc0 = std::conj(u[0]);
            for (int a = 0; a <= m; ++a) {
                const cplx P = S[a] - 0.5 * Gfull[n_max - a] * uc0 -
                               0.5 * Gfull[n_max + m - a] * ucm;
                const double wa = (a == 0 || a == m) ? 0.5 : 1.0;
                acc += wa * u[a] * P;
            }
            v[m] = dt * dt * acc.real();
        }
    }
};

} // namespace

GreenFunctionSet solve(const SystemSpec& sys,
                       const std::vector<ReservoirSpec>& reservoirs,
                       const TimeGrid& grid, const SolveOptions& opts) {
    sys.validate();
    for (const auto& r : reservoirs) r.validate(sys);

    const int N = sys.dim();
    const int n_max = grid.n_steps;
    GreenFunctionSet out;
    out.grid = grid;
    out.dim = N;
    out.stat = sys.stat;

    const auto g = memory_kernel_lattice(reservoirs, grid.dt, n_max);
    std::vector<cplx> gd(n_max + 1, cplx{});
    {
        std::vector<cplx> acc(n_max + 1, cplx{});
        for (const auto& r : reservoirs) {
            if (r.sd.zero_coupling()) continue;
            for (int m = 0; m <= n_max; ++m)
                acc[m] += spectral::memory_kernel_derivative(r.sd, m * grid.dt);
        }
        gd = std::move(acc);
    }
    std::vector<cplx> gt;
    if (opts.want_v) gt = noise_kernel_lattice(reservoirs, grid.dt, n_max);

    std::vector<LevelSolver> solvers;
    solvers.reserve(N);
    for (int i = 0; i < N; ++i)
        solvers.emplace_back(sys.levels[i], grid.dt, n_max, g, gd,
                             opts.want_v ? &gt : nullptr);

    Eigen::VectorXd n0 = Eigen::VectorXd::Zero(N);
    if (opts.n0.size() > 0) n0 = opts.n0.diagonal().real();

    const int window = std::max(1, static_cast<int>(std::round(opts.steady_window / grid.dt)));
    std::vector<double> occ_hist((n_max + 1) * N, 0.0);
    for (int i = 0; i < N; ++i) occ_hist[i] = n0[i];

    int steady = -1;
    int last = n_max;
    for (int n = 0; n < n_max; ++n) {
        for (auto& s : solvers) {
            s.advance(n);
            if (std::abs(s.u[n + 1]) > 1.0 + opts.norm_guard) {
                std::ostringstream msg;
                msg << "volterra step instability: |u| = " << std::abs(s.u[n + 1])
                    << " at t = " << grid.t(n + 1) << "; try dt <= " << grid.dt / 2;
                throw SolverError(msg.str());
            }
        }
        for (int i = 0; i < N; ++i) {
            const auto& s = solvers[i];
            const double occ = std::norm(s.u[n + 1]) * n0[i] +
                               (opts.want_v ? s.v[n + 1] : 0.0);
            occ_hist[(n + 1) * N + i] = occ;
        }
        if (steady < 0 && n + 1 >= window) {
            bool flat = true;
            for (int i = 0; i < N && flat; ++i) {
                const double now = occ_hist[(n + 1) * N + i];
                const double prev = occ_hist[(n + 1 - window) * N + i];
                const double scale = std::max({std::abs(now), std::abs(prev), 1e-12});
                if (std::abs(now - prev) / scale > opts.steady_tol) flat = false;
            }
            if (flat) {
                steady = n + 1;
                if (opts.stop_at_steady) {
                    last = n + 1;
                    break;
                }
            }
        }
    }

    out.grid.n_steps = last;
    out.steady_index = steady;
    out.u.resize(N);
    out.udot.resize(N);
    if (opts.want_uddot) out.uddot.resize(N);
    if (opts.want_v) out.v.resize(N);
    for (int i = 0; i < N; ++i) {
        auto& s = solvers[i];
        s.u.resize(last + 1);
        s.ud.resize(last + 1);
        out.u[i] = std::move(s.u);
        out.udot[i] = std::move(s.ud);
        if (opts.want_uddot) {
            s.udd.resize(last + 1);
            out.uddot[i] = std::move(s.udd);
        }
        if (opts.want_v) {
            s.v.resize(last + 1);
            out.v[i] = std::move(s.v);
        }
    }
    return out;
}

std::optional<spectral::BoundState>
combined_bound_state(const std::vector<ReservoirSpec>& reservoirs, double level) {
    // localized modes require J = 0 below every reservoir's support
    double edge = std::numeric_limits<double>::infinity();
    for (const auto& r : reservoirs) {
        if (r.sd.zero_coupling()) continue;
        if (!r.sd.has_gap_below()) return std::nullopt;
        edge = std::min(edge, r.sd.lower_edge());
    }
    if (!std::isfinite(edge)) return std::nullopt;
    // sum of shifts: y(w) = w - level - sum_alpha Delta_alpha(w)
    const auto y = [&](double w) {
        double d = w - level;
        for (const auto& r : reservoirs)
            if (!r.sd.zero_coupling()) d -= spectral::self_energy_shift(r.sd, w);
        return d;
    };
    double reach = 1.0 + std::abs(level);
    for (const auto& r : reservoirs) {
        if (r.sd.zero_coupling()) continue;
        if (r.sd.kind == spectral::Kind::Ohmic)
            reach += 10.0 * r.sd.eta * r.sd.omega_c;
        else
            reach += 10.0 * quad::adaptive_simpson([&](double w) { return r.sd(w); },
                                                   r.sd.lower_edge(),
                                                   r.sd.upper_cutoff(), 1e-9);
    }
    const double lo = edge - reach;
    const double hi = edge - 1e-12 * std::max(1.0, std::abs(edge) + std::abs(level));
    double fa = y(lo), fb = y(hi);
    if (fa * fb > 0.0) return std::nullopt;
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
        const double m = 0.5 * (a + b), fm = y(m);
        if (fa * fm <= 0.0) {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    spectral::BoundState bs;
    bs.omega_b = 0.5 * (a + b);
    double dD = 0.0;
    for (const auto& r : reservoirs)
        if (!r.sd.zero_coupling())
            dD += spectral::self_energy_shift_derivative(r.sd, bs.omega_b);
    bs.residue = 1.0 / (1.0 - dD);
    return bs;
}

namespace {

double combined_resonance(const std::vector<ReservoirSpec>& reservoirs, double level) {
    const auto y = [&](double w) {
        double d = w - level;
        for (const auto& r : reservoirs)
            if (!r.sd.zero_coupling()) d -= spectral::self_energy_shift(r.sd, w);
        return d;
    };
    double a = std::numeric_limits<double>::infinity();
    double b = -std::numeric_limits<double>::infinity();
    for (const auto& r : reservoirs) {
        if (r.sd.zero_coupling()) continue;
        a = std::min(a, r.sd.lower_edge());
        b = std::max(b, r.sd.upper_cutoff());
    }
    const int n = 4000;
    double pw = a + (b - a) * 1e-9, py = y(pw);
    for (int i = 1; i <= n; ++i) {
        const double w = a + (b - a) * (static_cast<double>(i) / n);
        const double yw = y(w);
        if (py * yw <= 0.0) {
            double lo = pw, hi = w, flo = py;
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
        pw = w;
        py = yw;
    }
    throw SolverError("steady_level_spectral: no resonance inside the support");
}

} // namespace

double steady_level_spectral(const std::vector<ReservoirSpec>& reservoirs,
                             double level) {
    return combined_resonance(reservoirs, level);
}

double steady_occupation_spectral(const std::vector<ReservoirSpec>& reservoirs,
                                  double level, double abs_tol) {
    if (auto bs = combined_bound_state(reservoirs, level))
        throw SolverError("steady_occupation_spectral: localized bound state at "
                          "omega_b = " + std::to_string(bs->omega_b) +
                          "; no thermalization");
    double a = std::numeric_limits<double>::infinity();
    double b = -std::numeric_limits<double>::infinity();
    for (const auto& r : reservoirs) {
        if (r.sd.zero_coupling()) continue;
        a = std::min(a, r.sd.lower_edge());
        b = std::max(b, r.sd.upper_cutoff());
    }
    if (!std::isfinite(a)) throw SolverError("steady occupation undefined at zero coupling");

    const auto Jtot = [&](double w) {
        double s = 0.0;
        for (const auto& r : reservoirs)
            if (!r.sd.zero_coupling()) s += (r.sd.kind == spectral::Kind::Ohmic && w <= 0.0) ? 0.0 : r.sd(w);
        return s;
    };
    const auto weight = [&](double w) -> double {
        double s = 0.0;
        for (const auto& r : reservoirs) {
            if (r.sd.zero_coupling()) continue;
            if (r.stat == Statistics::Bose && r.T0 == 0.0) continue;
            if (r.stat == Statistics::Bose && w <= r.mu0) continue;
            s += r.sd(w) * occupation(w, r.T0, r.mu0, r.stat);
        }
        return s;
    };
    const double wr = combined_resonance(reservoirs, level);
    const double width = M_PI * std::max(Jtot(wr), 1e-12);
    std::vector<double> breaks = {wr - 8.0 * width, wr, wr + 8.0 * width};
    for (const auto& r : reservoirs)
        if (r.stat == Statistics::Fermi) breaks.push_back(r.mu0);
    const auto f = [&](double w) {
        const double J = Jtot(w);
        if (J == 0.0) return 0.0;
        double delta = 0.0;
        for (const auto& r : reservoirs)
            if (!r.sd.zero_coupling()) delta += spectral::self_energy_shift(r.sd, w);
        const double y = w - level - delta;
        return weight(w) / (y * y + M_PI * M_PI * J * J);
    };
    return quad::adaptive_simpson_split(f, a == 0.0 ? 1e-13 : a, b, breaks, abs_tol);
}

} // namespace qtherm::greenfn
