#include "bessplace/optim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "bessplace/errors.hpp"
#include "bessplace/parallel.hpp"

namespace bessplace {

int Placement::cardinality() const {
    return static_cast<int>(std::count(z.begin(), z.end(), uint8_t{1}));
}

std::vector<int> Placement::bus_ids(const std::vector<int>& candidates) const {
    if (candidates.size() != z.size())
        fail_structural("placement length does not match the candidate list");
    std::vector<int> out;
    for (size_t j = 0; j < z.size(); ++j)
        if (z[j]) out.push_back(candidates[j]);
    return out;
}

double bernoulli_pdf(std::span<const uint8_t> x, std::span<const double> p) {
    if (x.size() != p.size()) fail_structural("bernoulli pdf: length mismatch");
    double prob = 1.0;
    for (size_t j = 0; j < x.size(); ++j) prob *= x[j] ? p[j] : 1.0 - p[j];
    return prob;
}

Placement sample_placement(std::span<const double> p, int n_es, Rng& rng) {
    const int m = static_cast<int>(p.size());
    int positive = 0;
    for (double w : p) {
        if (w < 0.0 || w > 1.0) fail_validation("sampling weights must lie in [0,1]");
        if (w > 0.0) ++positive;
    }
    if (positive < n_es)
        fail_validation("fewer positive sampling weights than sites to place");

    Placement out;
    out.z.assign(m, 0);
    std::vector<double> w(p.begin(), p.end());
    for (int pick = 0; pick < n_es; ++pick) {
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        double u = rng.uniform() * total;
        int chosen = -1;
        for (int j = 0; j < m; ++j) {
            if (w[j] <= 0.0) continue;
            u -= w[j];
            chosen = j;
            if (u <= 0.0) break;
        }
        out.z[chosen] = 1;
        w[chosen] = 0.0;
    }
    return out;
}

double elite_threshold(std::vector<double> scores, int n_elite) {
    if (scores.empty()) fail_validation("elite threshold of an empty score set");
    if (n_elite < 1 || n_elite > static_cast<int>(scores.size()))
        fail_validation("elite count out of range");
    std::sort(scores.begin(), scores.end());
    return scores[scores.size() - n_elite];
}

std::vector<double> update_p(const std::vector<Placement>& elite,
                             const std::vector<double>& previous_p, double alpha) {
    if (elite.empty()) fail_validation("update_p needs a non-empty elite set");
    if (!(alpha > 0.0 && alpha <= 1.0)) fail_validation("alpha must lie in (0,1]");
    const size_t m = previous_p.size();
    std::vector<double> p_hat(m, 0.0);
    for (const auto& e : elite) {
        if (e.z.size() != m) fail_structural("elite sample length mismatch");
        for (size_t j = 0; j < m; ++j) p_hat[j] += e.z[j];
    }
    std::vector<double> out(m);
    for (size_t j = 0; j < m; ++j)
        out[j] = alpha * p_hat[j] / elite.size() + (1.0 - alpha) * previous_p[j];
    return out;
}

namespace {

// top n_es coordinates, ties to the lower index
Placement decode_top(const std::vector<double>& values, int n_es) {
    std::vector<int> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return values[a] > values[b]; });
    Placement out;
    out.z.assign(values.size(), 0);
    for (int k = 0; k < n_es; ++k) out.z[idx[k]] = 1;
    return out;
}

// Memoized batch evaluator. Failures are kept and scored per batch as one
// unit below the worst finite value seen so far, so the sample matrix keeps
// its dimensions.
class Evaluator {
public:
    Evaluator(const Objective& obj, int workers) : obj_(obj), workers_(workers) {}

    std::vector<double> evaluate(const std::vector<Placement>& batch) {
        std::vector<const Placement*> fresh;
        for (const auto& pl : batch)
            if (!memo_.count(pl) && !pending_.count(pl)) {
                pending_.insert(pl);
                fresh.push_back(&pl);
            }
        std::vector<std::optional<double>> results(fresh.size());
        parallel_for(static_cast<int>(fresh.size()), workers_, [&](int i) {
            try {
                results[i] = obj_(*fresh[i]);
            } catch (...) {
                results[i] = std::nullopt;
            }
        });
        for (size_t i = 0; i < fresh.size(); ++i) {
            memo_.emplace(*fresh[i], results[i]);
            ++evaluations_;
        }
        pending_.clear();

        for (const auto& pl : batch) {
            const auto& v = memo_.at(pl);
            if (v && std::isfinite(*v)) worst_finite_ = std::min(worst_finite_, *v);
        }
        std::vector<double> scores;
        scores.reserve(batch.size());
        const double fail_score =
            (worst_finite_ == std::numeric_limits<double>::infinity() ? -1e12 : worst_finite_ - 1.0);
        for (const auto& pl : batch) {
            const auto& v = memo_.at(pl);
            scores.push_back(v && std::isfinite(*v) ? *v : fail_score);
        }
        return scores;
    }

    int evaluations() const { return evaluations_; }

private:
    const Objective& obj_;
    int workers_;
    std::map<Placement, std::optional<double>> memo_;
    std::set<Placement> pending_;
    double worst_finite_ = std::numeric_limits<double>::infinity();
    int evaluations_ = 0;
};

bool eps_binary(const std::vector<double>& p, double eps) {
    for (double v : p)
        if (std::abs(v - std::round(v)) >= eps) return false;
    return true;
}

}  // namespace

CEState ce_optimize(const Objective& objective, const CEParams& params, int m, int n_es,
                    int workers) {
    if (!(params.rho > 0.0 && params.rho < 1.0)) fail_validation("rho must lie in (0,1)");
    if (!(params.alpha > 0.0 && params.alpha <= 1.0)) fail_validation("alpha must lie in (0,1]");
    if (params.n_samples < 2) fail_validation("n_samples must be at least 2");
    if (m < n_es) fail_validation("more sites requested than candidate buses");
    const int n_elite = static_cast<int>(std::ceil(params.rho * params.n_samples));

    CEState st;
    if (params.p_init.empty()) {
        st.p.assign(m, static_cast<double>(n_es) / m);
    } else {
        if (static_cast<int>(params.p_init.size()) != m)
            fail_validation("p_init length does not match candidate count");
        st.p = params.p_init;
    }

    Evaluator eval(objective, workers);
    bool have_best = false;

    for (int t = 0; t < params.max_iter; ++t) {
        if (eps_binary(st.p, params.convergence_eps)) break;

        std::vector<Placement> batch(params.n_samples);
        for (int i = 0; i < params.n_samples; ++i) {
            Rng rng(substream_seed(params.seed, static_cast<uint64_t>(t), static_cast<uint64_t>(i)));
            batch[i] = sample_placement(st.p, n_es, rng);
        }
        const std::vector<double> scores = eval.evaluate(batch);

        for (int i = 0; i < params.n_samples; ++i) {
            if (!have_best || scores[i] > st.best_value) {
                if (!have_best || !(batch[i] == st.best_placement)) st.convergence_iter = t + 1;
                st.best_value = scores[i];
                st.best_placement = batch[i];
                have_best = true;
            }
        }

        std::vector<int> order(params.n_samples);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return scores[a] > scores[b]; });
        std::vector<Placement> elite;
        elite.reserve(n_elite);
        for (int k = 0; k < n_elite; ++k) elite.push_back(batch[order[k]]);

        st.gamma = elite_threshold(scores, n_elite);
        st.p = update_p(elite, st.p, params.alpha);
        st.iter = t + 1;
        st.trace.push_back({t + 1, st.best_value, st.gamma, st.p});
    }

    // fold the placement the final p decodes to into the incumbent
    Placement decoded = decode_top(st.p, n_es);
    const std::vector<double> s = eval.evaluate({decoded});
    if (!have_best || s[0] > st.best_value) {
        if (!have_best || !(decoded == st.best_placement)) st.convergence_iter = std::max(1, st.iter);
        st.best_value = s[0];
        st.best_placement = decoded;
    }
    st.evaluations = eval.evaluations();
    return st;
}

PSOResult pso_optimize(const Objective& objective, const PSOParams& params, int m, int n_es,
                       int workers) {
    if (params.swarm_size < 1) fail_validation("swarm_size must be at least 1");
    if (m < n_es) fail_validation("more sites requested than candidate buses");

    const int n = params.swarm_size;
    std::vector<std::vector<double>> x(n, std::vector<double>(m));
    std::vector<std::vector<double>> v(n, std::vector<double>(m));
    for (int i = 0; i < n; ++i) {
        Rng rng(substream_seed(params.seed, 0x696e6974ull, static_cast<uint64_t>(i)));
        for (int j = 0; j < m; ++j) x[i][j] = rng.uniform();
        for (int j = 0; j < m; ++j) v[i][j] = 0.2 * rng.uniform() - 0.1;
    }

    Evaluator eval(objective, workers);
    PSOResult res;
    std::vector<double> pbest_val(n, -std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> pbest_x = x;
    bool have_best = false;

    std::vector<Placement> batch(n);
    for (int iter = 1; iter <= params.max_iter; ++iter) {
        if (iter > 1) {
            for (int i = 0; i < n; ++i) {
                Rng rng(substream_seed(params.seed, static_cast<uint64_t>(iter),
                                       static_cast<uint64_t>(i)));
                for (int j = 0; j < m; ++j) {
                    const double r1 = rng.uniform();
                    const double r2 = rng.uniform();
                    v[i][j] = params.inertia * v[i][j] +
                              params.cognitive * r1 * (pbest_x[i][j] - x[i][j]) +
                              params.social * r2 * (res_gbest_x_[j] - x[i][j]);
                    v[i][j] = std::clamp(v[i][j], -params.v_max, params.v_max);
                    x[i][j] = std::clamp(x[i][j] + v[i][j], 0.0, 1.0);
                }
            }
        }

        for (int i = 0; i < n; ++i) batch[i] = decode_top(x[i], n_es);
        const std::vector<double> scores = eval.evaluate(batch);

        for (int i = 0; i < n; ++i) {
            if (scores[i] > pbest_val[i]) {
                pbest_val[i] = scores[i];
                pbest_x[i] = x[i];
            }
            if (!have_best || scores[i] > res.best_value) {
                if (!have_best || !(batch[i] == res.best_placement)) res.convergence_iter = iter;
                res.best_value = scores[i];
                res.best_placement = batch[i];
                res_gbest_x_ = x[i];
                have_best = true;
            }
        }
        res.trace.emplace_back(iter, res.best_value);
    }
    res.evaluations = eval.evaluations();
    return res;
}

}  // namespace bessplace
