#include "mfi/eval.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>

#include "text.hpp"

namespace mfi {

PerturbationStrategy PerturbationStrategy::local_mean(std::size_t radius) {
    if (radius < 1) throw Error(ErrorCode::invalid_argument, "local-mean radius must be at least 1");
    return {Kind::local_mean, radius, 0};
}

std::string_view to_string(PerturbationStrategy::Kind kind) {
    switch (kind) {
    case PerturbationStrategy::Kind::dataset_mean: return "dataset-mean";
    case PerturbationStrategy::Kind::local_mean: return "local-mean";
    case PerturbationStrategy::Kind::zero: return "zero";
    case PerturbationStrategy::Kind::uniform_symbol: return "uniform-symbol";
    }
    return "unknown";
}

Perturber::Perturber(PerturbationStrategy strategy, const SampleSet &reference)
    : strategy_(strategy), shape_(reference.shape()), alphabet_(reference.alphabet()) {
    using Kind = PerturbationStrategy::Kind;
    const bool images = shape_.kind == SampleKind::image;
    if (strategy_.kind == Kind::local_mean && strategy_.radius < 1) {
        throw Error(ErrorCode::invalid_argument, "local-mean radius must be at least 1");
    }
    if (images && strategy_.kind == Kind::uniform_symbol) {
        throw Error(ErrorCode::invalid_argument, "uniform-symbol perturbation needs sequences");
    }
    if (!images && (strategy_.kind == Kind::local_mean || strategy_.kind == Kind::zero)) {
        throw Error(ErrorCode::invalid_argument,
                    std::string(to_string(strategy_.kind)) + " perturbation needs images");
    }
    if (strategy_.kind != Kind::dataset_mean) return;

    if (images) {
        mean_pixels_.assign(shape_.size(), 0.0);
        for (const auto &x : reference) {
            const auto px = std::get<Image>(x).pixels();
            for (std::size_t p = 0; p < px.size(); ++p) mean_pixels_[p] += px[p];
        }
        for (auto &v : mean_pixels_) v /= static_cast<double>(reference.size());
        return;
    }
    // categorical "mean": most frequent symbol per position, ties to the lower alphabet index
    modal_symbols_.assign(shape_.cols, alphabet_.symbol(0));
    std::vector<std::size_t> counts(alphabet_.size());
    for (std::size_t j = 0; j < shape_.cols; ++j) {
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto &x : reference) ++counts[static_cast<std::size_t>(alphabet_.index(std::get<Sequence>(x)[j]))];
        const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
        modal_symbols_[j] = alphabet_.symbol(static_cast<std::size_t>(best));
    }
}

Sample Perturber::apply(const Sample &x, std::span<const std::size_t> coords) const {
    if (shape_of(x) != shape_) {
        throw Error(ErrorCode::shape_mismatch, "perturbing " + describe(shape_of(x)) + " with a " +
                                                   describe(shape_) + " reference");
    }
    for (auto c : coords) {
        if (c >= shape_.size()) throw Error(ErrorCode::out_of_bounds, "coordinate " + std::to_string(c) + " out of range");
    }
    using Kind = PerturbationStrategy::Kind;
    Sample out = x;
    if (auto *seq = std::get_if<Sequence>(&out)) {
        if (strategy_.kind == Kind::dataset_mean) {
            for (auto c : coords) (*seq)[c] = modal_symbols_[c];
            return out;
        }
        // FNV-1a of the original sequence decorrelates draws across samples
        std::uint64_t h = 1469598103934665603ull;
        for (char ch : std::get<Sequence>(x)) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
        std::mt19937_64 rng(strategy_.seed ^ h);
        std::uniform_int_distribution<std::size_t> pick(0, alphabet_.size() - 1);
        for (auto c : coords) (*seq)[c] = alphabet_.symbol(pick(rng));
        return out;
    }

    auto &img = std::get<Image>(out);
    const auto &orig = std::get<Image>(x);
    for (auto c : coords) {
        switch (strategy_.kind) {
        case Kind::dataset_mean: img[c] = mean_pixels_[c]; break;
        case Kind::zero: img[c] = 0.0; break;
        case Kind::local_mean: {
            // mean of the unperturbed neighbours within the window, centre excluded
            const auto r = static_cast<long>(c / shape_.cols);
            const auto col = static_cast<long>(c % shape_.cols);
            const auto rad = static_cast<long>(strategy_.radius);
            double sum = 0.0;
            std::size_t count = 0;
            for (long i = std::max(0L, r - rad); i <= std::min<long>(static_cast<long>(shape_.rows) - 1, r + rad); ++i) {
                for (long j = std::max(0L, col - rad); j <= std::min<long>(static_cast<long>(shape_.cols) - 1, col + rad); ++j) {
                    if (i == r && j == col) continue;
                    sum += orig(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                    ++count;
                }
            }
            img[c] = count ? sum / static_cast<double>(count) : orig[c];
            break;
        }
        case Kind::uniform_symbol: break;
        }
    }
    return out;
}

Sample perturb(const Sample &x, std::span<const std::size_t> coords, const PerturbationStrategy &strategy,
               const SampleSet &reference) {
    return Perturber(strategy, reference).apply(x, coords);
}

// ---------------------------------------------------------------------------

double sign_accuracy(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::label_count_mismatch, "scores and labels differ in length");
    }
    if (scores.empty()) throw Error(ErrorCode::invalid_argument, "accuracy of an empty set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        correct += (scores[i] > 0.0 && labels[i] > 0) || (scores[i] < 0.0 && labels[i] < 0);
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<std::size_t> relevance_order(const ImportanceMap &relevance) {
    std::vector<std::size_t> order(relevance.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto &va = relevance.values[a];
        const auto &vb = relevance.values[b];
        if (!vb) return va.has_value();
        if (!va) return false;
        return *va > *vb;
    });
    return order;
}

std::vector<std::size_t> random_order(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

MorfCurve morf_curve(const LabeledSet &test, const Predictor &s, std::span<const std::size_t> order,
                     const SampleSet &reference, const MorfOptions &options) {
    if (options.step < 1) throw Error(ErrorCode::invalid_argument, "MoRF step must be at least 1");
    if (test.labels.size() != test.samples.size()) {
        throw Error(ErrorCode::label_count_mismatch, "test labels and samples differ in length");
    }
    const Perturber perturber(options.perturbation, reference);
    MorfCurve curve;
    curve.perturbation = options.perturbation;

    std::vector<double> scores(test.samples.size());
    for (std::size_t t = 0; t <= options.steps; ++t) {
        const std::size_t count = std::min(order.size(), t * options.step);
        const auto prefix = order.subspan(0, count);
        parallel_for(test.samples.size(), options.threads, [&](std::size_t i) {
            scores[i] = count == 0 ? s.score(test.samples[i]) : s.score(perturber.apply(test.samples[i], prefix));
        });
        curve.points.push_back({t, count, options.metric(scores, test.labels)});
    }
    return curve;
}

MorfCurve morf_curve(const LabeledSet &test, const Predictor &s, const ImportanceMap &relevance,
                     const SampleSet &reference, const MorfOptions &options) {
    const Shape &shape = test.samples.shape();
    const bool matches = shape.kind == SampleKind::image
                             ? relevance.layout == Layout::grid(shape.rows, shape.cols)
                             : relevance.layout == Layout::positional(shape.cols, 1);
    if (!matches) throw Error(ErrorCode::layout_mismatch, "relevance map layout does not match " + describe(shape));
    const auto order = relevance_order(relevance);
    MorfCurve curve = morf_curve(test, s, order, reference, options);
    curve.ordering = MorfCurve::Ordering::relevance;
    return curve;
}

MorfCurve morf_curve_random(const LabeledSet &test, const Predictor &s, std::uint64_t seed,
                            const SampleSet &reference, const MorfOptions &options) {
    const auto order = random_order(test.samples.shape().size(), seed);
    MorfCurve curve = morf_curve(test, s, order, reference, options);
    curve.ordering = MorfCurve::Ordering::random;
    curve.seed = seed;
    return curve;
}

double area_over_curve(const MorfCurve &curve) {
    if (curve.points.size() < 2) throw Error(ErrorCode::invalid_argument, "area needs at least 2 curve points");
    const double baseline = curve.points.front().accuracy;
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        area += 0.5 * ((baseline - curve.points[i - 1].accuracy) + (baseline - curve.points[i].accuracy));
    }
    return area / static_cast<double>(curve.points.size() - 1);
}

void write_morf_csv(std::span<const MorfCurve> curves, std::ostream &out) {
    out << "step,perturbed_count,accuracy,ordering,seed\n";
    for (const auto &c : curves) {
        for (const auto &p : c.points) {
            out << p.step << ',' << p.perturbed << ',' << text::format_double(p.accuracy) << ','
                << (c.ordering == MorfCurve::Ordering::relevance ? "relevance" : "random") << ',';
            if (c.seed) out << *c.seed;
            out << '\n';
        }
    }
}

}  // namespace mfi
