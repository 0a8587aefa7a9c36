#pragma once

// Conditional-sampling estimators of feature importance.
//
// For a sample set Z, predictor s, explanation mode phi and condition f(X) = t:
//
//   MFI          S(t)  = mean over Z_t of s(z) phi(z) - mu_s mu_phi
//   kernel MFI   S+(t) = HSIC between k(s(.), s(.)) and l(phi(.), phi(.)) on Z_t
//
// where Z_t is the conditioned subset and mu_s, mu_phi are means over Z_t.
// POIM and FIRM are provided as the classical special cases.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mfi/core.hpp"
#include "mfi/kernels.hpp"

namespace mfi {

/// Members of Z that satisfy a condition. For the intervene strategy every
/// sample is a member and is materialized with the conditioned coordinates
/// overwritten by the target.
struct ConditionedSet {
    std::vector<std::size_t> indices;
    std::vector<double> weights;  // uniform, sums to 1
    ConditionSpec spec;

    std::size_t m() const noexcept { return indices.size(); }
    Strategy strategy() const noexcept { return spec.strategy; }
    /// The r-th member as the predictor sees it.
    Sample member(const SampleSet &z, std::size_t r) const;
    std::vector<Sample> members(const SampleSet &z) const;
};

/// Throws empty_conditioned_set when exact or epsilon matching finds nothing.
ConditionedSet condition(const SampleSet &z, const ConditionSpec &spec);

struct EstimatorOptions {
    bool centered = true;  // false gives the plain conditional mean of s(z) phi(z)
    unsigned threads = 1;
};

ImportanceMap mfi_estimate(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                           const ConditionSpec &spec, const EstimatorOptions &options = {});

/// Feature coordinates conditioned on in instance explanations.
struct InstanceWindow {
    enum class Kind { pixel, kmer };
    Kind kind = Kind::pixel;
    std::size_t k = 1;

    static InstanceWindow pixel() { return {Kind::pixel, 1}; }
    static InstanceWindow kmer(std::size_t k) { return {Kind::kmer, k}; }
};

struct InstanceOptions {
    Strategy strategy = Strategy::intervene;
    double epsilon = 0.05;
    /// Subtract the mean score over Z; off reports E[s | f = t] directly.
    bool subtract_global_mean = true;
    unsigned threads = 1;
};

/// Importance of every coordinate of g: E[s(X) | f(X) = f(g)] - E[s(X)].
/// Coordinates whose conditioned subset is empty are missing.
ImportanceMap instance_importance(const SampleSet &z, const Predictor &s, const Sample &g,
                                  const InstanceWindow &window, const InstanceOptions &options = {});

/// mfi_estimate with a constant condition (model-level explanation).
ImportanceMap model_importance(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                               const EstimatorOptions &options = {});

struct KernelMfiOptions {
    KernelSpec score_kernel = KernelSpec::rbf(1.0);
    /// Kernel on phi outputs. Defaults to rbf(1) for image features and delta
    /// for discrete (sparse-pwm / unit) features.
    std::optional<KernelSpec> feature_kernel;
    unsigned threads = 1;
};

KernelSpec default_feature_kernel(const ExplanationMode &mode);

/// HSIC between scores and whole phi outputs on the conditioned set.
/// Throws too_few_samples when fewer than 2 samples are conditioned.
double kernel_mfi(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                  const ConditionSpec &spec, const KernelMfiOptions &options = {});

/// One HSIC value per phi coordinate (scores versus that single feature).
ImportanceMap kernel_mfi_map(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                             const ConditionSpec &spec, const KernelMfiOptions &options = {});

/// Conditional mean score for every positional k-mer minus the mean score over
/// Z; k-mers never observed at a position are missing.
ImportanceMap poim(const SampleSet &z, const Predictor &s, std::size_t k, unsigned threads = 1);

struct FirmScore {
    double value = 0.0;  // standard deviation of the conditional means over t
    std::map<FeatureValue, double> conditional_means;
    std::map<FeatureValue, std::size_t> counts;
    bool degenerate = false;  // only one value of t was observed
};

FirmScore firm(const SampleSet &z, const Predictor &s, const Selector &selector);

struct ConvergenceCurve {
    std::vector<std::size_t> sizes;
    std::vector<double> seconds;    // wall time per size
    std::vector<double> distances;  // distances[i]: map(sizes[i+1]) vs map(sizes[i])
    double final_norm = 0.0;        // Frobenius norm of the largest-size map
};

/// Builds a map on each prefix Z[0, n) and records consecutive Frobenius distances.
ConvergenceCurve convergence_curve(const SampleSet &z, std::span<const std::size_t> sizes,
                                   const std::function<ImportanceMap(const SampleSet &)> &build);
ConvergenceCurve convergence_curve(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                                   const ConditionSpec &spec, std::span<const std::size_t> sizes,
                                   const EstimatorOptions &options = {});

/// Scores every sample, using up to `threads` workers.
std::vector<double> score_all(const Predictor &s, std::span<const Sample> xs, unsigned threads = 1);

}  // namespace mfi
