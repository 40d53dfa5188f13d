#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bessplace/rng.hpp"

namespace bessplace {

// Cardinality-constrained binary site selection; z has exactly n_es ones.
struct Placement {
    std::vector<uint8_t> z;

    int cardinality() const;
    std::vector<int> bus_ids(const std::vector<int>& candidates) const;
    bool operator==(const Placement&) const = default;
    bool operator<(const Placement& o) const { return z < o.z; }
};

struct CEParams {
    double rho = 0.5;    // elite fraction
    double alpha = 0.7;  // smoothing constant
    int n_samples = 20;
    int max_iter = 10;
    std::vector<double> p_init;  // empty: uniform n_es / m
    double convergence_eps = 0.01;
    uint64_t seed = 1;
};

struct CETraceRow {
    int iter = 0;
    double best_value = 0.0;
    double gamma = 0.0;
    std::vector<double> p;
};

struct CEState {
    std::vector<double> p;
    double gamma = 0.0;
    int iter = 0;  // iterations actually run
    Placement best_placement;
    double best_value = 0.0;
    int convergence_iter = 0;  // first iteration after which the incumbent stopped changing
    int evaluations = 0;       // objective calls after dedup
    std::vector<CETraceRow> trace;
};

struct PSOParams {
    int swarm_size = 30;
    int max_iter = 20;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    double v_max = 0.5;
    uint64_t seed = 1;
};

struct PSOResult {
    Placement best_placement;
    double best_value = 0.0;
    int convergence_iter = 0;
    int evaluations = 0;
    std::vector<std::pair<int, double>> trace;  // iter, incumbent value
};

using Objective = std::function<double(const Placement&)>;

// Multivariate Bernoulli mass at x.
double bernoulli_pdf(std::span<const uint8_t> x, std::span<const double> p);

// Exactly n_es ones via sequential weighted sampling without replacement with
// weights p. Deterministic given the rng state.
Placement sample_placement(std::span<const double> p, int n_es, Rng& rng);

// Ascending order statistic S_(N-Ne+1).
double elite_threshold(std::vector<double> scores, int n_elite);

// Column means of the elite matrix, smoothed against the previous vector.
std::vector<double> update_p(const std::vector<Placement>& elite,
                             const std::vector<double>& previous_p, double alpha);

// Cross-entropy loop: sample -> evaluate -> elite -> update -> smooth, until p
// is within convergence_eps of a binary vector or max_iter is hit. Objective
// evaluations inside one batch run concurrently when workers > 1; sampling uses
// per-(iteration, sample) substreams so results are schedule independent.
CEState ce_optimize(const Objective& objective, const CEParams& params, int m, int n_es,
                    int workers = 1);

// Global-best PSO over [0,1]^m; positions decode to placements by taking the
// n_es largest coordinates.
PSOResult pso_optimize(const Objective& objective, const PSOParams& params, int m, int n_es,
                       int workers = 1);

}  // namespace bessplace
