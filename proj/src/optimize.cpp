#include "splitdist/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

namespace splitdist {

std::vector<double> numeric_gradient(const Objective& f, const std::vector<double>& x,
                                     double rel_step) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        if (std::isfinite(fp) && std::isfinite(fm)) {
            g[i] = (fp - fm) / (2.0 * h);
        } else {
            // One-sided fallback next to an infeasible region.
            const double f0 = f(x);
            g[i] = std::isfinite(fp) ? (fp - f0) / h : (f0 - fm) / h;
        }
    }
    return g;
}

MinimizeResult minimize_bfgs(const Objective& f, std::vector<double> x0,
                             const MinimizeOptions& opts) {
    const auto n = static_cast<Eigen::Index>(x0.size());
    MinimizeResult res;
    res.x = x0;
    res.f = f(x0);
    if (!std::isfinite(res.f)) return res;
    if (n == 0) {
        res.converged = true;
        return res;
    }

    auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    auto grad = [&](const Eigen::VectorXd& x) {
        auto g = numeric_gradient(f, to_vec(x), opts.fd_step);
        return Eigen::Map<Eigen::VectorXd>(g.data(), n).eval();
    };

    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
    Eigen::VectorXd g = grad(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    double fx = res.f;
    int small_steps = 0;

    for (int it = 0; it < opts.max_iter; ++it) {
        res.iterations = it + 1;
        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd d = -H * g;
        if (d.dot(g) >= 0.0) {
            H.setIdentity();
            d = -g;
        }
        // Keep the first trial step from leaving the region where f is finite.
        const double dmax = d.lpNorm<Eigen::Infinity>();
        double t = dmax > 5.0 ? 5.0 / dmax : 1.0;
        Eigen::VectorXd xn;
        double fn = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + t * d;
            fn = f(to_vec(xn));
            if (std::isfinite(fn) && fn <= fx + 1e-4 * t * g.dot(d)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (H.isIdentity()) break;
            H.setIdentity();
            continue;
        }
        Eigen::VectorXd gn = grad(xn);
        Eigen::VectorXd s = xn - x;
        Eigen::VectorXd yv = gn - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
                rho * s * s.transpose();
        }
        const double change = std::abs(fx - fn) / std::max(1.0, std::abs(fx));
        x = xn;
        g = gn;
        fx = fn;
        if (change < opts.f_tol) {
            if (++small_steps >= 3) {
                res.converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    res.x = to_vec(x);
    res.f = fx;
    return res;
}

std::pair<double, double> minimize_scalar(const std::function<double(double)>& f, double lo,
                                          double hi, int bits) {
    std::uintmax_t max_iter = 500;
    auto r = boost::math::tools::brent_find_minima(f, lo, hi, bits, max_iter);
    return {r.first, r.second};
}

}  // namespace splitdist
