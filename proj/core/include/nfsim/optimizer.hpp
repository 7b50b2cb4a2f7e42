#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfsim/config.hpp"
#include "nfsim/propagation.hpp"
#include "nfsim/stack.hpp"

namespace nfsim {

// Everything the focal-coherence objective depends on besides the phases.
struct StackProblem {
    ApertureRef grid;
    std::vector<double> spacings;
    std::vector<GridRef> planes;
    ComplexField feed;                          // incident on layer 1
    std::vector<LinearPropagator> interlayer;   // plane l -> plane l+1
    Eigen::VectorXcd target;                    // focusing field on the last plane

    std::size_t layer_count() const { return planes.size(); }
};

StackProblem make_problem(const SystemConfig& config, double r);

// Field leaving the last layer.
Eigen::VectorXcd output_field(const LayerStack& stack, const StackProblem& problem);

// |<E, conj(t)>| / (|E| |t|): coherence of the output with the converging target wave.
double focal_coherence(const LayerStack& stack, const StackProblem& problem);

struct OptimizationTrace {
    std::vector<double> coherence;
    std::vector<double> gain_loss_db;
    std::vector<double> wall_time;  // seconds since start
    std::vector<std::string> stage;  // "init", "sweep", "refine" or "align"
    int sweeps = 0;
    int refine_iterations = 0;
    std::string termination;
};

struct OptimizationResult {
    LayerStack stack;
    OptimizationTrace trace;
};

OptimizationResult optimize_phases(const StackProblem& problem, const OptimizerSettings& settings,
                                   std::uint64_t seed = 1);
OptimizationResult optimize_stack(const SystemConfig& config, double r, const OptimizerSettings& settings);

double quantize_phase(double phi, int bits);
LayerStack quantize_phases(const LayerStack& stack, int bits);

// Misalignment, loss and spacing error, then quantization; deterministic in params.rng_seed.
LayerStack inject_imperfections(const LayerStack& stack, const ImperfectionParams& params);

// Lateral offsets applied to each layer (layer 1 is the reference and never moves).
std::vector<std::array<double, 2>> misalignment_offsets(std::size_t layers, double magnitude,
                                                        std::uint64_t seed);

double operator_mismatch(const LinearPropagator& g_sim, const LinearPropagator& g_target);

std::string stack_to_json(const LayerStack& stack);
LayerStack stack_from_json(const std::string& text);

}  // namespace nfsim
