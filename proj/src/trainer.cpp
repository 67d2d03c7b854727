#include "endofair/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "endofair/errors.hpp"

namespace endofair {

LabeledSet select_labeled(std::size_t total, double fraction, SeededRng& rng) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("select_labeled: fraction outside [0,1]");
    const std::size_t count = static_cast<std::size_t>(fraction * static_cast<double>(total));
    std::vector<std::size_t> pool(total);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates: the first `count` slots become the sample
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.index_below(total - i));
        std::swap(pool[i], pool[j]);
    }
    LabeledSet out;
    out.indices.assign(pool.begin(), pool.begin() + static_cast<long>(count));
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

namespace {

LossBreakdown combined_loss_flat(const std::vector<double>& refined,
                                 const std::vector<double>& fair, const LabeledSet& labeled,
                                 const EmpiricalDistribution& target, double lambda,
                                 const SinkhornConfig& cfg) {
    LossBreakdown out;
    for (const std::size_t i : labeled.indices) {
        const double d = fair[i] - refined[i];
        out.supervised += d * d;
    }
    if (lambda != 0.0) {
        const auto res = sinkhorn_w1(EmpiricalDistribution(refined), target, cfg);
        if (!res.converged)
            throw NumericalError("combined_loss: transport solve did not converge");
        out.w1 = res.cost;
    }
    out.total = out.supervised + lambda * out.w1;
    return out;
}

struct FlatProblem {
    Tensor initial_estimate;        // network input
    std::vector<double> fair;       // flattened reference scores
    EmpiricalDistribution target;   // order-free multiset of fair scores
};

TrainOutput train_flat(std::vector<FlatProblem> phases, const std::vector<std::size_t>& phase_epochs,
                       const NetworkSpec& net, const TrainConfig& cfg) {
    validate_network(net);
    const std::size_t total = phases.front().fair.size();

    SeededRng rng(cfg.seed);
    TrainOutput out;
    out.net = net;
    out.labeled = select_labeled(total, cfg.labeled_fraction, rng);
    out.params = init_params(net, rng);

    auto adam = init_adam(cfg.adam, out.params);
    SinkhornSolver solver(cfg.sinkhorn, cfg.sinkhorn_best_effort);

    ParamStore last_finite = out.params;
    std::size_t epoch = 0;
    for (std::size_t phase = 0; phase < phases.size(); ++phase) {
        const FlatProblem& prob = phases[phase];
        if (prob.fair.size() != total)
            throw std::invalid_argument("train: phases disagree on grid size");
        for (std::size_t e = 0; e < phase_epochs[phase]; ++e, ++epoch) {
            auto fwd = forward_traced(net, out.params, prob.initial_estimate);
            Tensor output_grad = Tensor::zeros(fwd.output.shape);

            double supervised = 0.0;
            for (const std::size_t i : out.labeled.indices) {
                const double d = prob.fair[i] - fwd.output.data[i];
                supervised += d * d;
                output_grad.data[i] = -2.0 * d;
            }

            double w1 = 0.0;
            if (cfg.lambda != 0.0) {
                std::vector<double> wgrad;
                const auto ot = solver.evaluate(fwd.output.data, prob.target.atoms, &wgrad);
                w1 = ot.cost;
                for (std::size_t i = 0; i < output_grad.size(); ++i)
                    output_grad.data[i] += cfg.lambda * wgrad[i];
            }

            const double combined = supervised + cfg.lambda * w1;
            out.trace.records.push_back({epoch, combined, w1, supervised, phase});
            if (!std::isfinite(combined)) {
                out.params = last_finite; // keep the last finite state
                out.aborted_non_finite = true;
                out.refined = forward(net, out.params, prob.initial_estimate).data;
                out.initial_estimate = prob.initial_estimate.data;
                return out;
            }
            last_finite = out.params;

            const auto grads = backward_from_trace(net, out.params, fwd, output_grad);
            adam_step(adam, out.params, grads.param_grads);
        }
    }

    const FlatProblem& last = phases.back();
    out.initial_estimate = last.initial_estimate.data;
    out.refined = forward(net, out.params, last.initial_estimate).data;
    return out;
}

} // namespace

LossBreakdown combined_loss(const Field1D& refined, const Field1D& fair, const LabeledSet& labeled,
                            const EmpiricalDistribution& target, double lambda,
                            const SinkhornConfig& cfg) {
    if (!(refined.grid == fair.grid))
        throw std::invalid_argument("combined_loss: grid mismatch");
    return combined_loss_flat(refined.values, fair.values, labeled, target, lambda, cfg);
}

LossBreakdown combined_loss(const Field2D& refined, const Field2D& fair, const LabeledSet& labeled,
                            const EmpiricalDistribution& target, double lambda,
                            const SinkhornConfig& cfg) {
    if (!(refined.grid == fair.grid))
        throw std::invalid_argument("combined_loss: grid mismatch");
    return combined_loss_flat(refined.values, fair.values, labeled, target, lambda, cfg);
}

TrainOutput train(const Field1D& observed, const SmootherSpec& smoother, const Field1D& fair,
                  const NetworkSpec& net, const TrainConfig& cfg) {
    if (!(observed.grid == fair.grid))
        throw std::invalid_argument("train: observed/fair grid mismatch");
    FlatProblem prob;
    prob.initial_estimate = Tensor{{observed.size()}, smooth(observed, smoother).values};
    prob.fair = fair.values;
    prob.target = EmpiricalDistribution(fair.values);
    return train_flat({std::move(prob)}, {cfg.epochs}, net, cfg);
}

TrainOutput train(const Field2D& observed, const SmootherSpec& smoother, const Field2D& fair,
                  const NetworkSpec& net, const TrainConfig& cfg) {
    if (!(observed.grid == fair.grid))
        throw std::invalid_argument("train: observed/fair grid mismatch");
    FlatProblem prob;
    prob.initial_estimate = Tensor{{observed.grid.axis1.count, observed.grid.axis2.count},
                                   smooth(observed, smoother).values};
    prob.fair = fair.values;
    prob.target = EmpiricalDistribution(fair.values);
    return train_flat({std::move(prob)}, {cfg.epochs}, net, cfg);
}

TrainOutput train_time_varying(const std::vector<Field2D>& observed, const PhaseSchedule& schedule,
                               const SmootherSpec& smoother, const NetworkSpec& net,
                               const TrainConfig& cfg) {
    if (schedule.phases.empty()) throw std::invalid_argument("train_time_varying: empty schedule");
    if (observed.size() != schedule.phases.size())
        throw std::invalid_argument("train_time_varying: observed fields do not match schedule");
    std::vector<FlatProblem> phases;
    std::vector<std::size_t> phase_epochs;
    for (std::size_t p = 0; p < schedule.phases.size(); ++p) {
        if (schedule.phases[p].epochs == 0)
            throw std::invalid_argument("train_time_varying: phase epochs must be positive");
        const auto fair = eval_scenario(schedule.phases[p].scenario, observed[p].grid);
        FlatProblem prob;
        prob.initial_estimate = Tensor{{observed[p].grid.axis1.count, observed[p].grid.axis2.count},
                                       smooth(observed[p], smoother).values};
        prob.fair = fair.values;
        prob.target = EmpiricalDistribution(fair.values);
        phases.push_back(std::move(prob));
        phase_epochs.push_back(schedule.phases[p].epochs);
    }
    return train_flat(std::move(phases), phase_epochs, net, cfg);
}

BoundProbeResult bound_probe(const NetworkSpec& net, const Tensor& initial_estimate,
                             const std::vector<double>& fair_values, const LabeledSet& labeled,
                             double lambda, const ParamStore& params_star,
                             const ParamStore& specialist, SpecialistKind kind,
                             const SinkhornConfig& cfg, double slack_rel) {
    const EmpiricalDistribution target(fair_values);
    auto eval_terms = [&](const ParamStore& params) {
        const auto output = forward(net, params, initial_estimate);
        double sup = 0.0;
        for (const std::size_t i : labeled.indices) {
            const double d = fair_values[i] - output.data[i];
            sup += d * d;
        }
        const auto res = sinkhorn_w1(EmpiricalDistribution(output.data), target, cfg);
        if (!res.converged)
            throw NumericalError("bound_probe: transport solve did not converge");
        return std::pair<double, double>{sup, res.cost};
    };

    const auto [sup_star, w1_star] = eval_terms(params_star);
    const auto [sup_spec, w1_spec] = eval_terms(specialist);

    BoundProbeResult out;
    if (kind == SpecialistKind::FitsLabels) {
        out.specialist_metric = sup_spec;
        out.applicable = sup_spec <= 1e-6;
        out.lhs = sup_star;
        out.rhs = lambda * w1_spec;
    } else {
        out.specialist_metric = w1_spec;
        out.applicable = w1_spec <= 1e-4;
        out.lhs = w1_star;
        out.rhs = sup_spec / lambda;
    }
    out.satisfied = out.applicable && out.lhs <= out.rhs * (1.0 + slack_rel) + 1e-12;
    return out;
}

} // namespace endofair
