#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace qtherm::quad {

inline constexpr double kDefaultAbsTol = 1e-10;

namespace detail {

template <typename F, typename R>
R simpson_rec(const F& f, double a, double m, double b, R fa, R fm, R fb,
              R whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const R flm = f(lm), frm = f(rm);
    const R left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const R right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const R delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Adaptive composite Simpson with absolute tolerance. Works for double and
// std::complex<double> integrands.
template <typename F>
auto adaptive_simpson(const F& f, double a, double b,
                      double abs_tol = kDefaultAbsTol, int max_depth = 52)
    -> decltype(f(a)) {
    using R = decltype(f(a));
    if (a == b) return R{};
    const double m = 0.5 * (a + b);
    const R fa = f(a), fm = f(m), fb = f(b);
    const R whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(f, a, m, b, fa, fm, fb, whole, abs_tol, max_depth);
}

// Same, subdivided first at the given interior break points (peaks, steps).
template <typename F>
auto adaptive_simpson_split(const F& f, double a, double b,
                            std::vector<double> breaks,
                            double abs_tol = kDefaultAbsTol)
    -> decltype(f(a)) {
    using R = decltype(f(a));
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    R total{};
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
        if (hi > lo) total += adaptive_simpson(f, lo, hi, abs_tol);
    }
    return total;
}

// One uniformly panelled stretch of a Fourier-integral domain.
struct FourierSegment {
    double a{0.0};
    double b{0.0};
    int panels{0}; // quadratic-interpolation panels of width (b-a)/panels
};

namespace detail {

struct FilonWeights {
    std::complex<double> wm, w0, wp; // nodes xm-h, xm, xm+h
};

// Weights for \int_{-1}^{1} L(xi) e^{-i theta xi} dxi with quadratic Lagrange
// interpolation through xi = -1, 0, 1. Series branch avoids cancellation.
inline FilonWeights filon_weights(double theta) {
    std::complex<double> M0, M1, M2;
    const double t2 = theta * theta;
    if (std::abs(theta) < 0.1) {
        M0 = 2.0 * (1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0);
        M1 = std::complex<double>(0.0, 2.0) *
             (-theta / 3.0 + theta * t2 / 30.0 - theta * t2 * t2 / 840.0);
        M2 = 2.0 * (1.0 / 3.0 - t2 / 10.0 + t2 * t2 / 168.0);
    } else {
        const double s = std::sin(theta), c = std::cos(theta);
        M0 = 2.0 * s / theta;
        M1 = std::complex<double>(0.0, 2.0) * (theta * c - s) / t2;
        M2 = 2.0 * ((t2 - 2.0) * s + 2.0 * theta * c) / (t2 * theta);
    }
    FilonWeights w;
    w.wm = 0.5 * (M2 - M1);
    w.w0 = M0 - M2;
    w.wp = 0.5 * (M2 + M1);
    return w;
}

} // namespace detail

// Evaluates F(s_m) = \int phi(w) e^{-i w s_m} dw on the lattice
// s_m = s0 + m*ds, m = 0..n_s-1, over piecewise-uniform Filon panels.
// Accuracy is set by the panel resolution of phi, independent of s.
inline std::vector<std::complex<double>>
fourier_lattice(const std::function<double(double)>& phi,
                const std::vector<FourierSegment>& segments,
                double s0, double ds, int n_s) {
    using C = std::complex<double>;
    struct SegData {
        double a, h;
        int panels;
        std::vector<double> fm, f0, fp; // node values per panel
    };
    std::vector<SegData> data;
    for (const auto& seg : segments) {
        if (seg.panels <= 0 || seg.b <= seg.a)
            throw std::invalid_argument("fourier_lattice: bad segment");
        SegData d;
        d.a = seg.a;
        d.panels = seg.panels;
        d.h = 0.5 * (seg.b - seg.a) / seg.panels;
        d.fm.resize(seg.panels);
        d.f0.resize(seg.panels);
        d.fp.resize(seg.panels);
        for (int p = 0; p < seg.panels; ++p) {
            const double xm = seg.a + (2 * p + 1) * d.h;
            d.fm[p] = phi(xm - d.h);
            d.f0[p] = phi(xm);
            d.fp[p] = phi(xm + d.h);
        }
        data.push_back(std::move(d));
    }
    std::vector<C> out(n_s);
    for (int m = 0; m < n_s; ++m) {
        const double s = s0 + m * ds;
        C acc{0.0, 0.0};
        for (const auto& d : data) {
            const auto w = detail::filon_weights(s * d.h);
            C phase = std::polar(1.0, -s * (d.a + d.h));
            const C rot = std::polar(1.0, -s * 2.0 * d.h);
            for (int p = 0; p < d.panels; ++p) {
                acc += d.h * phase * (w.wm * d.fm[p] + w.w0 * d.f0[p] + w.wp * d.fp[p]);
                phase *= rot;
            }
        }
        out[m] = acc;
    }
    return out;
}

} // namespace qtherm::quad
