#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "endofair/datagen.hpp"
#include "endofair/grid.hpp"
#include "endofair/network.hpp"
#include "endofair/smoothing.hpp"
#include "endofair/transport.hpp"

namespace endofair {

struct TrainConfig {
    double lambda = 1.0;
    std::size_t epochs = 300;
    double labeled_fraction = 0.0;
    std::uint64_t seed = 1;
    SinkhornConfig sinkhorn;
    AdamConfig adam;
    // Training-loop transport mode: bounded iteration budget, gradients from
    // the best available plan. Strict solves stay available for metrology.
    bool sinkhorn_best_effort = true;
};

// Sorted distinct indices into the flattened grid.
struct LabeledSet {
    std::vector<std::size_t> indices;
    std::size_t size() const { return indices.size(); }
};

// Uniform sample without replacement of floor(fraction * total) indices.
LabeledSet select_labeled(std::size_t total, double fraction, SeededRng& rng);

struct LossRecord {
    std::size_t epoch = 0;
    double combined = 0.0;
    double wasserstein = 0.0;
    double supervised = 0.0;
    std::size_t phase = 0;
};

struct LossTrace {
    std::vector<LossRecord> records;
};

struct LossBreakdown {
    double total = 0.0;
    double supervised = 0.0;
    double w1 = 0.0;
};

// Unnormalized squared-error sum over the labeled set plus lambda times the
// transport distance between the target distribution and the refined scores.
// Throws NumericalError if the transport solve does not converge.
LossBreakdown combined_loss(const Field1D& refined, const Field1D& fair, const LabeledSet& labeled,
                            const EmpiricalDistribution& target, double lambda,
                            const SinkhornConfig& cfg);
LossBreakdown combined_loss(const Field2D& refined, const Field2D& fair, const LabeledSet& labeled,
                            const EmpiricalDistribution& target, double lambda,
                            const SinkhornConfig& cfg);

struct TrainOutput {
    NetworkSpec net;
    ParamStore params;
    LossTrace trace;
    LabeledSet labeled;
    std::vector<double> initial_estimate; // smoother output fed to the network
    std::vector<double> refined;          // network output after the last epoch
    bool aborted_non_finite = false;      // params hold the last finite state
};

// Full-batch minimization of the combined loss. The fair field enters only
// through the labeled values and, order-free, the target distribution.
TrainOutput train(const Field1D& observed, const SmootherSpec& smoother, const Field1D& fair,
                  const NetworkSpec& net, const TrainConfig& cfg);
TrainOutput train(const Field2D& observed, const SmootherSpec& smoother, const Field2D& fair,
                  const NetworkSpec& net, const TrainConfig& cfg);

// Sequential phases sharing parameter state; labeled values and the target
// distribution swap at phase boundaries. observed must match the schedule.
TrainOutput train_time_varying(const std::vector<Field2D>& observed, const PhaseSchedule& schedule,
                               const SmootherSpec& smoother, const NetworkSpec& net,
                               const TrainConfig& cfg);

enum class SpecialistKind {
    FitsLabels,           // data-fidelity near zero on the labeled set
    MatchesDistribution,  // transport distance near zero
};

struct BoundProbeResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
    bool applicable = false;        // specialist met its membership threshold
    double specialist_metric = 0.0; // the membership value that was checked
};

// Checks the minimizer bound against a specialist: a FitsLabels specialist
// bounds the minimizer's supervised error by lambda times the specialist's
// transport term; a MatchesDistribution specialist bounds the minimizer's
// transport term by the specialist's supervised error over lambda.
BoundProbeResult bound_probe(const NetworkSpec& net, const Tensor& initial_estimate,
                             const std::vector<double>& fair_values, const LabeledSet& labeled,
                             double lambda, const ParamStore& params_star,
                             const ParamStore& specialist, SpecialistKind kind,
                             const SinkhornConfig& cfg, double slack_rel = 0.1);

} // namespace endofair
