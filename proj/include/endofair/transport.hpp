#pragma once

#include <vector>

#include "endofair/grid.hpp"

namespace endofair {

struct SinkhornConfig {
    double epsilon = 1e-4;      // entropic regularization at the final level
    int max_iters = 10000;      // iteration cap per epsilon level
    double tol = 1e-9;          // L1 marginal-violation stop
    int eps_scaling_steps = 30; // geometric annealing levels down to epsilon
    bool debiased = true;       // divergence form: subtract self-transport terms
};

struct TransportResult {
    double cost = 0.0;
    std::vector<double> potential_f; // dual potential on a's atoms, input order
    std::vector<double> potential_g; // dual potential on b's atoms, input order
    int iterations_used = 0;
    bool converged = false;
};

// Exact 1-Wasserstein distance for equal-count uniform empirical
// distributions: mean absolute difference of sorted atoms.
double exact_w1_1d(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

// Entropic transport cost with ground cost |a_i - b_j|, log-domain with
// epsilon scaling. Non-convergence is reported via converged=false.
TransportResult sinkhorn_w1(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                            const SinkhornConfig& cfg);

// d(cost)/d(a.atoms[i]) by the envelope theorem on the converged plan.
// Throws NumericalError if the solve does not converge.
std::vector<double> w1_grad_atoms(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                                  const SinkhornConfig& cfg);

// Repeated solves against a fixed target with slowly moving source atoms
// (one solve per training epoch). Reuses the previous call's potentials as a
// warm start and caches the target's self-transport term.
//
// best_effort trades the strict convergence contract for a bounded iteration
// budget: gradients are returned from the best available plan as long as the
// marginal violation stays small, and `converged` reports the truth. This is
// the training-loop mode; metrology-grade checks should leave it off.
class SinkhornSolver {
public:
    explicit SinkhornSolver(SinkhornConfig cfg, bool best_effort = false)
        : cfg_(cfg), best_effort_(best_effort) {}

    struct Output {
        double cost = 0.0;
        bool converged = false;
        int iterations_used = 0;
        double marginal_violation = 0.0;
    };

    // grad_a, when non-null, receives d(cost)/d(a[i]) in input order.
    Output evaluate(const std::vector<double>& a, const std::vector<double>& b,
                    std::vector<double>* grad_a);

private:
    SinkhornConfig cfg_;
    bool best_effort_ = false;
    bool warm_ = false;
    int refresh_cooldown_ = 0;
    std::vector<double> f_, g_, pa_;     // potentials on sorted order
    std::vector<double> cached_b_;       // target for which the cache is valid
    double cached_b_self_cost_ = 0.0;
    std::vector<double> pb_;
};

} // namespace endofair
