#include "splitdist/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "splitdist/common.hpp"

namespace splitdist {

namespace {

BetaRule build_rule(double a, double b, int n) {
    // Jacobi weight (1 - t)^al (1 + t)^be on [-1, 1], mapped by x = (1 + t) / 2.
    const double al = b - 1.0;
    const double be = a - 1.0;
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
    diag(0) = (be - al) / (al + be + 2.0);
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + al + be;
        diag(k) = (be * be - al * al) / (s * (s + 2.0));
    }
    for (int k = 1; k < n; ++k) {
        double bk;
        if (k == 1) {
            const double s = 2.0 + al + be;
            bk = 4.0 * (1.0 + al) * (1.0 + be) / (s * s * (s + 1.0));
        } else {
            const double s = 2.0 * k + al + be;
            bk = 4.0 * k * (k + al) * (k + be) * (k + al + be) / (s * s * (s + 1.0) * (s - 1.0));
        }
        sub(k - 1) = std::sqrt(bk);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw ConvergenceError("beta_rule: eigen decomposition failed");

    BetaRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = es.eigenvectors()(0, i);
        rule.nodes[i] = std::clamp(0.5 * (1.0 + es.eigenvalues()(i)), 0.0, 1.0);
        rule.weights[i] = v * v;
        wsum += v * v;
    }
    for (double& w : rule.weights) w /= wsum;
    return rule;
}

}  // namespace

std::shared_ptr<const BetaRule> beta_rule(double a, double b, int n) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("beta_rule: shape parameters must be positive");
    if (n < 1) throw InvalidParameter("beta_rule: need at least one node");
    static std::mutex mu;
    static std::map<std::tuple<double, double, int>, std::shared_ptr<const BetaRule>> cache;
    const auto key = std::make_tuple(a, b, n);
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto rule = std::make_shared<const BetaRule>(build_rule(a, b, n));
    std::lock_guard<std::mutex> lock(mu);
    if (cache.size() > 4096) cache.clear();
    cache.emplace(key, rule);
    return rule;
}

}  // namespace splitdist
