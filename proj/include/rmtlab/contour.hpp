#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include "rmtlab/errors.hpp"

namespace rmtlab {

namespace detail {

/// (P_n(x), P_n'(x)) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int order, double x)
{
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    return {p1, order * (x * p1 - p0) / (x * x - 1.0)};
}

} // namespace detail

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int order)
{
    if (order < 1) {
        throw Error(Errc::invalid_argument, "Gauss-Legendre order must be positive");
    }
    std::vector<double> nodes(static_cast<std::size_t>(order));
    std::vector<double> weights(static_cast<std::size_t>(order));
    for (int i = 0; i < (order + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, dp] = detail::legendre_with_derivative(order, x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) <= 1e-16) break;
        }
        const double dp = detail::legendre_with_derivative(order, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(order - 1 - i);
        nodes[lo] = -x;
        nodes[hi] = x;
        weights[lo] = w;
        weights[hi] = w;
    }
    return {nodes, weights};
}

struct ContourNode {
    std::complex<double> z;
    std::complex<double> weight; // includes dz/dt
};

/// Boundary of [u_l, u_r] × [−v0, v0], counterclockwise, one Gauss–Legendre rule per side.
struct ContourSpec {
    double u_l = 0.5;
    double u_r = 1.5;
    double v0 = 1.0;
    double delta = 0.5;
    double vartheta = 0.5;
    int nq_per_segment = 64;
    std::vector<ContourNode> nodes;

    bool encloses(double x) const noexcept { return x > u_l && x < u_r; }

    /// True when z lies on one of the four sides (within tol).
    bool on_contour(std::complex<double> z, double tol = 1e-12) const noexcept
    {
        const double t = tol * (1.0 + std::abs(z));
        const double re = z.real();
        const double im = z.imag();
        const bool vertical = (std::abs(re - u_l) <= t || std::abs(re - u_r) <= t) && std::abs(im) <= v0 + t;
        const bool horizontal = std::abs(std::abs(im) - v0) <= t && re >= u_l - t && re <= u_r + t;
        return vertical || horizontal;
    }

    template <class Integrand>
    std::complex<double> integrate(Integrand&& fn) const
    {
        std::complex<double> sum{0.0, 0.0};
        for (const ContourNode& node : nodes) {
            sum += node.weight * fn(node.z);
        }
        return sum;
    }

    ContourSpec reversed() const
    {
        ContourSpec out = *this;
        out.nodes.assign(nodes.rbegin(), nodes.rend());
        for (ContourNode& node : out.nodes) node.weight = -node.weight;
        return out;
    }
};

inline ContourSpec build_contour(double delta, double v0, int nq_per_segment, double vartheta = 0.5)
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw Error(Errc::invalid_argument, "delta must lie in (0,1)");
    }
    if (!(v0 > 0.0)) {
        throw Error(Errc::invalid_argument, "v0 must be positive");
    }
    if (nq_per_segment < 8) {
        throw Error(Errc::invalid_argument, "at least 8 nodes per segment are required");
    }
    if (!(vartheta > 0.0 && vartheta < 1.0)) {
        throw Error(Errc::invalid_argument, "vartheta must lie in (0,1)");
    }
    ContourSpec c;
    c.delta = delta;
    c.u_l = 1.0 - delta;
    c.u_r = 1.0 + delta;
    c.v0 = v0;
    c.vartheta = vartheta;
    c.nq_per_segment = nq_per_segment;

    using C = std::complex<double>;
    const C corners[4] = {C(c.u_l, -v0), C(c.u_r, -v0), C(c.u_r, v0), C(c.u_l, v0)};
    const auto [x, w] = gauss_legendre(nq_per_segment);
    c.nodes.reserve(4 * static_cast<std::size_t>(nq_per_segment));
    for (int side = 0; side < 4; ++side) {
        const C a = corners[side];
        const C b = corners[(side + 1) % 4];
        const C mid = 0.5 * (a + b);
        const C half = 0.5 * (b - a);
        for (std::size_t k = 0; k < x.size(); ++k) {
            c.nodes.push_back({mid + half * x[k], half * w[k]});
        }
    }
    return c;
}

} // namespace rmtlab
