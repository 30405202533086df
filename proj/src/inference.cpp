#include "splitdist/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "splitdist/optimize.hpp"

namespace splitdist {

namespace {

std::atomic<std::size_t> g_part_fits{0};

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

void check_vectors(std::span<const CountVector> data) {
    if (data.empty()) throw DataError("no observations");
    const std::size_t J = data.front().size();
    if (J < 2) throw DimensionMismatch("observations need at least two coordinates");
    for (const auto& y : data) {
        if (y.size() != J) throw DimensionMismatch("observations have inconsistent dimension");
        for (Count v : y)
            if (v < 0) throw DataError("negative count in observation");
    }
}

WeightedCounts totals_of(const WeightedVectors& wv) {
    std::map<Count, double> hist;
    for (std::size_t i = 0; i < wv.rows.size(); ++i) hist[total(wv.rows[i])] += wv.weights[i];
    WeightedCounts out;
    for (auto& [k, w] : hist) {
        out.values.push_back(k);
        out.weights.push_back(w);
    }
    return out;
}

SingularFit fit_singular_part(SingularTag tag, const WeightedVectors& wv, const FitOptions& opts,
                              const DirichletFitOptions& dopts) {
    ++g_part_fits;
    switch (tag) {
        case SingularTag::Multinomial:
            return multinomial_mle(wv);
        case SingularTag::DirichletMultinomial:
            return dirichlet_multinomial_mle(wv, dopts);
        case SingularTag::MultivariateHypergeometric:
            if (!opts.urn) throw InvalidParameter("hypergeometric fit needs the urn composition");
            return hypergeometric_fit(wv, *opts.urn);
    }
    throw InvalidParameter("unknown singular kind");
}

SumFit fit_sum_part(FamilyTag tag, const WeightedCounts& wc, const SumFitOptions& opts) {
    ++g_part_fits;
    return sum_fit(tag, wc, opts);
}

FitReport combine(const SingularFit& s, const SumFit& t, double n_obs) {
    FitReport r;
    r.model = SplittingModel{s.model, t.model};
    r.singular_part = s.stats;
    r.sum_part = t.stats;
    r.singular_part.n_obs = n_obs;
    r.sum_part.n_obs = n_obs;
    r.loglik = s.stats.loglik + t.stats.loglik;
    r.n_params = s.stats.n_params + t.stats.n_params;
    r.n_obs = n_obs;
    r.bic = r.singular_part.bic() + r.sum_part.bic();
    r.aic = r.singular_part.aic() + r.sum_part.aic();
    r.converged = s.stats.converged && t.stats.converged;
    r.iterations = s.stats.iterations + t.stats.iterations;
    r.flags = s.stats.flags;
    r.flags.merge(t.stats.flags);
    return r;
}

FitReport fit_canonical(const WeightedVectors& wv, const WeightedCounts& wc, const FitOptions& opts, double n_obs) {
    const std::size_t J = wv.dimension();
    auto parts = [&](double A) {
        DirichletFitOptions d = opts.dirichlet;
        d.fixed_total = A;
        SumFitOptions so = opts.sum;
        so.fixed["a"] = A;
        SingularFit s = fit_singular_part(SingularTag::DirichletMultinomial, wv, opts, d);
        SumFit t = fit_sum_part(FamilyTag::BetaBinomial, wc, so);
        return std::pair{s, t};
    };

    double lo = 1e-3, hi = 1e6;
    double guess = 1.0;
    try {
        SumFit t = fit_sum_part(FamilyTag::BetaBinomial, wc, opts.sum);
        guess = std::get<fam::BetaBinomial>(t.model.family).a;
    } catch (const std::exception&) {
    }
    try {
        SingularFit s = fit_singular_part(SingularTag::DirichletMultinomial, wv, opts, opts.dirichlet);
        const auto& alpha = std::get<sing::DirichletMultinomial>(s.model).alpha;
        const double A = std::accumulate(alpha.begin(), alpha.end(), 0.0);
        if (std::isfinite(A) && A > 0.0) guess = std::sqrt(guess * std::min(A, 1e5));
    } catch (const std::exception&) {
    }
    guess = std::clamp(guess, lo, hi);
    lo = std::max(lo, guess / 1e3);
    hi = std::min(hi, guess * 1e3);

    auto objective = [&](double logA) {
        try {
            auto [s, t] = parts(std::exp(logA));
            const double ll = s.stats.loglik + t.stats.loglik;
            return std::isfinite(ll) ? -ll : kInf;
        } catch (const std::exception&) {
            return kInf;
        }
    };
    auto [logA, fval] = minimize_scalar(objective, std::log(lo), std::log(hi), 40);
    if (!std::isfinite(fval)) throw DomainError("canonical fit: constraint a = |alpha| is infeasible for the data");
    auto [s, t] = parts(std::exp(logA));
    FitReport r = combine(s, t, n_obs);
    // |alpha| is free, a is tied to it.
    r.n_params = static_cast<int>(J - 1) + t.stats.n_params + 1;
    r.singular_part.n_params = static_cast<int>(J);
    r.bic = r.singular_part.bic() + r.sum_part.bic();
    r.aic = r.singular_part.aic() + r.sum_part.aic();
    if (std::abs(logA - std::log(lo)) < 1e-6 || std::abs(logA - std::log(hi)) < 1e-6)
        r.flags.set(FitFlag::Boundary);
    return r;
}

}  // namespace

std::size_t part_fit_count() { return g_part_fits.load(); }
void reset_part_fit_count() { g_part_fits = 0; }

FitReport fit_splitting(SingularTag singular, FamilyTag sum, std::span<const CountVector> data,
                        const FitOptions& opts) {
    check_vectors(data);
    const WeightedVectors wv = WeightedVectors::from(data);
    const WeightedCounts wc = totals_of(wv);
    const double n_obs = static_cast<double>(data.size());

    if (opts.canonical) {
        if (singular != SingularTag::DirichletMultinomial || sum != FamilyTag::BetaBinomial)
            throw InvalidParameter("canonical fit applies to dirichlet-multinomial with a beta-binomial sum");
        FitReport r = fit_canonical(wv, wc, opts, n_obs);
        validate(r.model);
        return r;
    }

    SingularFit s = fit_singular_part(singular, wv, opts, opts.dirichlet);
    SumFit t = fit_sum_part(sum, wc, opts.sum);
    FitReport r = combine(s, t, n_obs);
    validate(r.model);
    return r;
}

Selection select_model(std::span<const CountVector> data, std::span<const SingularTag> singulars,
                       std::span<const FamilyTag> sums, Criterion criterion, const FitOptions& opts) {
    if (singulars.empty() || sums.empty()) throw InvalidParameter("select_model: empty candidate list");
    check_vectors(data);
    const WeightedVectors wv = WeightedVectors::from(data);
    const WeightedCounts wc = totals_of(wv);
    const double n_obs = static_cast<double>(data.size());

    const std::size_t C = singulars.size(), L = sums.size();
    std::vector<std::optional<SingularFit>> sfits(C);
    std::vector<std::optional<SumFit>> tfits(L);
    std::vector<std::string> serr(C), terr(L);

    parallel_for(C + L, opts.threads, [&](std::size_t i) {
        try {
            if (i < C) sfits[i] = fit_singular_part(singulars[i], wv, opts, opts.dirichlet);
            else tfits[i - C] = fit_sum_part(sums[i - C], wc, opts.sum);
        } catch (const std::exception& e) {
            (i < C ? serr[i] : terr[i - C]) = e.what();
        }
    });

    Selection sel;
    sel.singular_fits = C;
    sel.sum_fits = L;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t l = 0; l < L; ++l) {
            GridCell cell{singulars[c], sums[l], std::nullopt, {}, kInf};
            if (!sfits[c]) {
                cell.error = singular_name(singulars[c]) + ": " + serr[c];
            } else if (!tfits[l]) {
                cell.error = family_name(sums[l]) + ": " + terr[l];
            } else {
                try {
                    FitReport r = combine(*sfits[c], *tfits[l], n_obs);
                    validate(r.model);
                    cell.score = r.score(criterion);
                    cell.report = std::move(r);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            }
            sel.ranked.push_back(std::move(cell));
        }
    }
    std::stable_sort(sel.ranked.begin(), sel.ranked.end(), [](const GridCell& a, const GridCell& b) {
        if (a.report.has_value() != b.report.has_value()) return a.report.has_value();
        if (a.report && a.score != b.score) return a.score < b.score;
        if (a.report && a.report->n_params != b.report->n_params) return a.report->n_params < b.report->n_params;
        if (a.singular != b.singular) return static_cast<int>(a.singular) < static_cast<int>(b.singular);
        return static_cast<int>(a.sum) < static_cast<int>(b.sum);
    });
    return sel;
}

// ------------------------------------------------------------ mixtures

void validate(const MixtureModel& m) {
    if (m.components.empty()) throw InvalidParameter("mixture: no components");
    if (m.weights.size() != m.components.size()) throw DimensionMismatch("mixture: weights and components differ");
    double s = 0.0;
    for (double w : m.weights) {
        if (!(w > 0.0)) throw InvalidParameter("mixture: weights must be positive");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw InvalidParameter("mixture: weights must sum to 1");
    const std::size_t J = dimension(m.components.front());
    for (const auto& c : m.components) {
        validate(c);
        if (dimension(c) != J) throw DimensionMismatch("mixture: components differ in dimension");
    }
}

std::string describe(const MixtureModel& m) {
    std::ostringstream os;
    for (std::size_t k = 0; k < m.components.size(); ++k) {
        if (k) os << " + ";
        os << m.weights[k] << " * [" << describe(m.components[k]) << "]";
    }
    return os.str();
}

double mixture_log_pmf(const MixtureModel& m, std::span<const Count> y) {
    double acc = kNegInf;
    for (std::size_t k = 0; k < m.components.size(); ++k)
        acc = log_add(acc, std::log(m.weights[k]) + joint_log_pmf(m.components[k], y));
    return acc;
}

double mixture_loglik(const MixtureModel& m, std::span<const CountVector> data) {
    double ll = 0.0;
    for (const auto& y : data) ll += mixture_log_pmf(m, y);
    return ll;
}

std::vector<std::size_t> mixture_assign(const MixtureModel& m, std::span<const CountVector> data) {
    std::vector<std::size_t> out;
    out.reserve(data.size());
    for (const auto& y : data) {
        std::size_t best = 0;
        double best_lp = kNegInf;
        for (std::size_t k = 0; k < m.components.size(); ++k) {
            const double lp = std::log(m.weights[k]) + joint_log_pmf(m.components[k], y);
            if (lp > best_lp) {
                best_lp = lp;
                best = k;
            }
        }
        out.push_back(best);
    }
    return out;
}

Count default_mixture_shift(FamilyTag tag) {
    switch (tag) {
        case FamilyTag::Binomial:
        case FamilyTag::NegativeBinomial:
        case FamilyTag::Poisson:
            return 1;
        default:
            return 0;
    }
}

namespace {

struct Component {
    SplittingModel model;
    FamilyTag family;
    int singular_params = 0;
    int sum_params = 0;
};

struct EmData {
    std::vector<CountVector> rows;
    std::vector<double> counts;
    double N = 0.0;
};

struct EmRun {
    std::vector<Component> comps;
    std::vector<double> weights;
    std::vector<double> trace;
    double loglik = kNegInf;
    bool converged = false;
    bool monotone = true;
    int iterations = 0;
    FitFlags flags;
};

class Em {
public:
    Em(const EmData& d, const MixtureOptions& o) : d_(d), o_(o) {}

    Count shift(FamilyTag f) const {
        auto it = o_.shifts.find(f);
        return it == o_.shifts.end() ? default_mixture_shift(f) : it->second;
    }

    // Per-row log(w_k) + log p_k(y_i).
    std::vector<std::vector<double>> log_terms(const EmRun& run) const {
        const std::size_t K = run.comps.size();
        std::vector<std::vector<double>> lp(d_.rows.size(), std::vector<double>(K));
        for (std::size_t i = 0; i < d_.rows.size(); ++i)
            for (std::size_t k = 0; k < K; ++k)
                lp[i][k] = std::log(run.weights[k]) + joint_log_pmf(run.comps[k].model, d_.rows[i]);
        return lp;
    }

    double observed(const EmRun& run) const {
        auto lp = log_terms(run);
        double ll = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) {
            double acc = kNegInf;
            for (double v : lp[i]) acc = log_add(acc, v);
            ll += d_.counts[i] * acc;
        }
        return ll;
    }

    // Responsibility-weighted counts per component.
    std::vector<std::vector<double>> e_step(const EmRun& run) const {
        auto lp = log_terms(run);
        const std::size_t K = run.comps.size();
        std::vector<std::vector<double>> w(K, std::vector<double>(d_.rows.size()));
        for (std::size_t i = 0; i < lp.size(); ++i) {
            double acc = kNegInf;
            for (double v : lp[i]) acc = log_add(acc, v);
            for (std::size_t k = 0; k < K; ++k) w[k][i] = d_.counts[i] * std::exp(lp[i][k] - acc);
        }
        return w;
    }

    WeightedVectors weighted_rows(const std::vector<double>& w) const {
        WeightedVectors wv;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) {
                wv.rows.push_back(d_.rows[i]);
                wv.weights.push_back(w[i]);
            }
        }
        return wv;
    }

    SingularFit fit_singular(const WeightedVectors& wv) const {
        if (o_.singular == SingularTag::DirichletMultinomial) return dirichlet_multinomial_mle(wv);
        return multinomial_mle(wv);
    }

    SumFit fit_sum(FamilyTag f, const WeightedCounts& wc) const {
        SumFitOptions so;
        so.shift = shift(f);
        return sum_fit(f, wc, so);
    }

    // Family with the smallest weighted BIC.
    std::optional<std::pair<FamilyTag, SumFit>> select_family(const WeightedCounts& wc) const {
        std::optional<std::pair<FamilyTag, SumFit>> best;
        double best_bic = kInf;
        for (FamilyTag f : o_.families) {
            try {
                SumFit t = fit_sum(f, wc);
                const double b = t.stats.bic();
                if (std::isfinite(b) && b < best_bic) {
                    best_bic = b;
                    best = std::pair{f, t};
                }
            } catch (const std::exception&) {
            }
        }
        return best;
    }

    void update_weights(EmRun& run, const std::vector<std::vector<double>>& w) const {
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double s = std::accumulate(w[k].begin(), w[k].end(), 0.0);
            if (s / d_.N < 1.0 / (10.0 * d_.N))
                throw DegenerateComponent("mixture component " + std::to_string(k) + " has vanishing weight");
            run.weights[k] = s / d_.N;
        }
        const double tot = std::accumulate(run.weights.begin(), run.weights.end(), 0.0);
        for (double& v : run.weights) v /= tot;
    }

    // M-step from weights; free family choice when `select` is set.
    void m_step(EmRun& run, const std::vector<std::vector<double>>& w, bool initial) const {
        update_weights(run, w);
        for (std::size_t k = 0; k < w.size(); ++k) {
            WeightedVectors wv = weighted_rows(w[k]);
            WeightedCounts wc = totals_of(wv);
            Component& c = run.comps[k];
            SingularFit s = fit_singular(wv);
            if (initial) {
                auto sel = select_family(wc);
                if (!sel) throw DataError("no admissible sum family for mixture component");
                c.model = SplittingModel{s.model, sel->second.model};
                c.family = sel->first;
                c.singular_params = s.stats.n_params;
                c.sum_params = sel->second.stats.n_params;
                continue;
            }
            // Generalized EM: keep each part only when it does not lower the
            // expected complete-data log-likelihood.
            SingularModel sing = c.model.singular;
            if (singular_loglik(s.model, wv) >= singular_loglik(sing, wv)) sing = s.model;
            SumModel sum = c.model.sum;
            try {
                SumFit t = fit_sum(c.family, wc);
                if (sum_loglik(t.model, wc) >= sum_loglik(sum, wc)) {
                    sum = t.model;
                    c.sum_params = t.stats.n_params;
                }
            } catch (const std::exception&) {
            }
            c.model = SplittingModel{sing, sum};
            c.singular_params = s.stats.n_params;
        }
    }

    // Re-selects sum families; kept only if the observed likelihood does not drop.
    bool checkpoint(EmRun& run, const std::vector<std::vector<double>>& w) const {
        EmRun cand = run;
        bool changed = false;
        for (std::size_t k = 0; k < w.size(); ++k) {
            WeightedCounts wc = totals_of(weighted_rows(w[k]));
            auto sel = select_family(wc);
            if (!sel || sel->first == run.comps[k].family) continue;
            cand.comps[k].family = sel->first;
            cand.comps[k].model.sum = sel->second.model;
            cand.comps[k].sum_params = sel->second.stats.n_params;
            changed = true;
        }
        if (!changed) return false;
        const double ll = observed(cand);
        if (!(ll > run.loglik + o_.tol * std::max(1.0, std::abs(run.loglik)))) return false;
        cand.loglik = ll;
        run = std::move(cand);
        return true;
    }

    EmRun run_from(const std::vector<std::vector<double>>& w0) const {
        const std::size_t K = w0.size();
        EmRun run;
        run.comps.resize(K);
        run.weights.assign(K, 1.0 / static_cast<double>(K));
        m_step(run, w0, true);
        run.loglik = observed(run);
        run.trace.push_back(run.loglik);
        for (int it = 1; it <= o_.max_iter; ++it) {
            auto w = e_step(run);
            EmRun next = run;
            m_step(next, w, false);
            next.loglik = observed(next);
            const double gain = next.loglik - run.loglik;
            const double scale = std::max(1.0, std::abs(run.loglik));
            if (gain < -1e-10 * scale) run.monotone = false;
            next.monotone = run.monotone;
            run = std::move(next);
            run.iterations = it;
            bool switched = false;
            const bool at_checkpoint = o_.checkpoint > 0 && it % o_.checkpoint == 0;
            if (at_checkpoint || gain < o_.tol * scale) switched = checkpoint(run, e_step(run));
            run.trace.push_back(run.loglik);
            if (gain < o_.tol * scale && !switched) {
                run.converged = true;
                break;
            }
        }
        return run;
    }

    const EmData& d_;
    const MixtureOptions& o_;
};

// Hard assignment from weighted k-means++ on (standardized |y|, y / |y|).
std::vector<std::size_t> kmeans(const EmData& d, std::size_t K, Rng& rng) {
    const std::size_t n = d.rows.size(), J = d.rows.front().size();
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += d.counts[i] * static_cast<double>(total(d.rows[i]));
    mean /= d.N;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = static_cast<double>(total(d.rows[i])) - mean;
        var += d.counts[i] * z * z;
    }
    const double sd = std::sqrt(var / d.N) > 0.0 ? std::sqrt(var / d.N) : 1.0;
    std::vector<std::vector<double>> x(n, std::vector<double>(J + 1));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(total(d.rows[i]));
        x[i][0] = (t - mean) / sd;
        for (std::size_t j = 0; j < J; ++j)
            x[i][j + 1] = t > 0.0 ? static_cast<double>(d.rows[i][j]) / t : 1.0 / static_cast<double>(J);
    }
    auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        return s;
    };

    std::vector<std::vector<double>> centers;
    std::discrete_distribution<std::size_t> first(d.counts.begin(), d.counts.end());
    centers.push_back(x[first(rng)]);
    std::vector<double> dmin(n, kInf);
    while (centers.size() < K) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            dmin[i] = std::min(dmin[i], dist2(x[i], centers.back()));
            p[i] = d.counts[i] * dmin[i];
        }
        if (std::accumulate(p.begin(), p.end(), 0.0) <= 0.0) break;
        std::discrete_distribution<std::size_t> next(p.begin(), p.end());
        centers.push_back(x[next(rng)]);
    }
    if (centers.size() < K) throw DegenerateComponent("fewer distinct observations than components");

    std::vector<std::size_t> label(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = kInf;
            for (std::size_t k = 0; k < K; ++k) {
                const double dd = dist2(x[i], centers[k]);
                if (dd < bd) {
                    bd = dd;
                    best = k;
                }
            }
            if (best != label[i] || iter == 0) moved = moved || best != label[i];
            label[i] = best;
        }
        std::vector<std::vector<double>> sum(K, std::vector<double>(J + 1, 0.0));
        std::vector<double> wsum(K, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            wsum[label[i]] += d.counts[i];
            for (std::size_t j = 0; j <= J; ++j) sum[label[i]][j] += d.counts[i] * x[i][j];
        }
        for (std::size_t k = 0; k < K; ++k)
            if (wsum[k] > 0.0)
                for (std::size_t j = 0; j <= J; ++j) centers[k][j] = sum[k][j] / wsum[k];
        if (!moved && iter > 0) break;
    }
    return label;
}

}  // namespace

MixtureFit fit_mixture(std::span<const CountVector> data, std::size_t n_components, const MixtureOptions& opts) {
    check_vectors(data);
    if (n_components < 1) throw InvalidParameter("fit_mixture: need at least one component");
    if (data.size() < n_components) throw DataError("fit_mixture: fewer observations than components");
    if (opts.families.empty()) throw InvalidParameter("fit_mixture: no sum families allowed");
    if (opts.singular == SingularTag::MultivariateHypergeometric)
        throw InvalidParameter("fit_mixture: hypergeometric components are not supported");

    EmData d;
    {
        WeightedVectors wv = WeightedVectors::from(data);
        d.rows = std::move(wv.rows);
        d.counts = std::move(wv.weights);
        d.N = static_cast<double>(data.size());
    }
    const std::size_t K = n_components;
    Em em(d, opts);

    std::vector<std::optional<EmRun>> runs;
    std::vector<std::string> errors;
    if (K == 1) {
        runs.resize(1);
        errors.resize(1);
        runs[0] = em.run_from(std::vector<std::vector<double>>{d.counts});
    } else {
        const std::size_t R = static_cast<std::size_t>(std::max(1, opts.restarts));
        runs.resize(R);
        errors.resize(R);
        parallel_for(R, opts.threads, [&](std::size_t r) {
            try {
                std::seed_seq seq{opts.seed, static_cast<std::uint64_t>(r)};
                Rng rng(seq);
                auto label = kmeans(d, K, rng);
                std::vector<std::vector<double>> w(K, std::vector<double>(d.rows.size(), 0.0));
                for (std::size_t i = 0; i < d.rows.size(); ++i) w[label[i]][i] = d.counts[i];
                runs[r] = em.run_from(w);
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        });
    }

    const EmRun* best = nullptr;
    bool monotone = true;
    for (const auto& r : runs) {
        if (!r) continue;
        monotone = monotone && r->monotone;
        if (!best || r->loglik > best->loglik) best = &*r;
    }
    if (!best) {
        std::string msg = "fit_mixture: every restart failed";
        for (const auto& e : errors)
            if (!e.empty()) {
                msg += ": " + e;
                break;
            }
        throw DegenerateComponent(msg);
    }

    MixtureFit out;
    out.model.weights = best->weights;
    for (const auto& c : best->comps) out.model.components.push_back(c.model);
    out.trace = best->trace;
    out.monotone = monotone;
    out.stats.loglik = best->loglik;
    out.stats.n_obs = d.N;
    out.stats.n_params = static_cast<int>(K) - 1;
    for (const auto& c : best->comps) out.stats.n_params += c.singular_params + c.sum_params;
    out.stats.converged = best->converged;
    out.stats.iterations = best->iterations;
    out.stats.flags = best->flags;
    return out;
}

}  // namespace splitdist
