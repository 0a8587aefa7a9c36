#pragma once

// Most-Relevant-First evaluation: perturb coordinates in relevance order and
// track how fast the predictor's accuracy decays, compared to random orders.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mfi/core.hpp"

namespace mfi {

struct PerturbationStrategy {
    enum class Kind { dataset_mean, local_mean, zero, uniform_symbol };
    Kind kind = Kind::dataset_mean;
    std::size_t radius = 1;   // local_mean window half-width
    std::uint64_t seed = 0;   // uniform_symbol draws

    static PerturbationStrategy dataset_mean() { return {Kind::dataset_mean, 1, 0}; }
    static PerturbationStrategy local_mean(std::size_t radius);
    static PerturbationStrategy zero() { return {Kind::zero, 1, 0}; }
    static PerturbationStrategy uniform_symbol(std::uint64_t seed) { return {Kind::uniform_symbol, 1, seed}; }
};

std::string_view to_string(PerturbationStrategy::Kind kind);

/// Replaces coordinates (flat row-major pixel indices or 0-based sequence
/// positions) according to a strategy. Reference statistics come from Z.
class Perturber {
public:
    Perturber(PerturbationStrategy strategy, const SampleSet &reference);

    /// Throws out_of_bounds or shape_mismatch. Coordinates not listed are untouched.
    Sample apply(const Sample &x, std::span<const std::size_t> coords) const;
    const PerturbationStrategy &strategy() const noexcept { return strategy_; }

private:
    PerturbationStrategy strategy_;
    Shape shape_;
    Alphabet alphabet_;
    std::vector<double> mean_pixels_;  // dataset_mean on images
    std::string modal_symbols_;        // dataset_mean on sequences
};

Sample perturb(const Sample &x, std::span<const std::size_t> coords, const PerturbationStrategy &strategy,
               const SampleSet &reference);

struct MorfPoint {
    std::size_t step = 0;
    std::size_t perturbed = 0;
    double accuracy = 0.0;
};

struct MorfCurve {
    enum class Ordering { relevance, random };
    std::vector<MorfPoint> points;
    Ordering ordering = Ordering::relevance;
    std::optional<std::uint64_t> seed;  // random orderings only
    PerturbationStrategy perturbation;
};

using PerformanceMetric = std::function<double(std::span<const double> scores, std::span<const int> labels)>;

/// Fraction of samples with sign(score) == label; a zero score counts as wrong.
double sign_accuracy(std::span<const double> scores, std::span<const int> labels);

/// Coordinates by descending relevance; ties by ascending coordinate, missing values last.
std::vector<std::size_t> relevance_order(const ImportanceMap &relevance);
std::vector<std::size_t> random_order(std::size_t count, std::uint64_t seed);

struct MorfOptions {
    std::size_t step = 1;    // coordinates perturbed per step
    std::size_t steps = 10;  // number of steps after the baseline
    PerturbationStrategy perturbation;
    PerformanceMetric metric = sign_accuracy;
    unsigned threads = 1;
};

/// Curve for an explicit coordinate order. Step t perturbs the first t * step
/// coordinates of every test sample (capped at the number of coordinates).
MorfCurve morf_curve(const LabeledSet &test, const Predictor &s, std::span<const std::size_t> order,
                     const SampleSet &reference, const MorfOptions &options = {});
/// Relevance ordering; the map layout must match the sample shape. Throws layout_mismatch.
MorfCurve morf_curve(const LabeledSet &test, const Predictor &s, const ImportanceMap &relevance,
                     const SampleSet &reference, const MorfOptions &options = {});
MorfCurve morf_curve_random(const LabeledSet &test, const Predictor &s, std::uint64_t seed,
                            const SampleSet &reference, const MorfOptions &options = {});

/// Trapezoidal area between the baseline level and the curve, divided by the
/// number of steps. Larger means faster degradation.
double area_over_curve(const MorfCurve &curve);

/// CSV with header step,perturbed_count,accuracy,ordering,seed.
void write_morf_csv(std::span<const MorfCurve> curves, std::ostream &out);

}  // namespace mfi
