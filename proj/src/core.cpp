#include "mfi/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mfi {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::symbol_not_in_alphabet: return "symbol-not-in-alphabet";
    case ErrorCode::non_finite_pixel: return "non-finite-pixel";
    case ErrorCode::k_too_large: return "k-too-large";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::incompatible_kernel: return "incompatible-kernel";
    case ErrorCode::empty_conditioned_set: return "empty-conditioned-set";
    case ErrorCode::too_few_samples: return "too-few-samples";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::label_count_mismatch: return "label-count-mismatch";
    case ErrorCode::process_failure: return "process-failure";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::unparseable_response: return "unparseable-response";
    case ErrorCode::malformed_file: return "malformed-file";
    case ErrorCode::version_mismatch: return "version-mismatch";
    case ErrorCode::malformed_row: return "malformed-row";
    case ErrorCode::inconsistent_dimensions: return "inconsistent-dimensions";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::motif_overflow: return "motif-overflow";
    case ErrorCode::out_of_bounds: return "out-of-bounds";
    case ErrorCode::layout_mismatch: return "layout-mismatch";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

// ---------------------------------------------------------------------------

Alphabet::Alphabet() : Alphabet("ACGT") {}

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
    lookup_.fill(-1);
    if (symbols_.size() < 2) {
        throw Error(ErrorCode::invalid_argument, "alphabet needs at least 2 symbols");
    }
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
        auto &slot = lookup_[static_cast<unsigned char>(symbols_[i])];
        if (slot >= 0) {
            throw Error(ErrorCode::invalid_argument,
                        std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
        }
        slot = static_cast<int>(i);
    }
}

char Alphabet::symbol(std::size_t i) const {
    if (i >= symbols_.size()) throw Error(ErrorCode::out_of_bounds, "symbol index out of range");
    return symbols_[i];
}

std::size_t Alphabet::kmer_index(std::string_view kmer) const {
    std::size_t idx = 0;
    for (char c : kmer) {
        const int s = index(c);
        if (s < 0) {
            throw Error(ErrorCode::symbol_not_in_alphabet,
                        std::string("symbol '") + c + "' not in alphabet " + symbols_);
        }
        idx = idx * symbols_.size() + static_cast<std::size_t>(s);
    }
    return idx;
}

std::string Alphabet::kmer(std::size_t index, std::size_t k) const {
    std::string out(k, symbols_[0]);
    for (std::size_t p = k; p-- > 0;) {
        out[p] = symbols_[index % symbols_.size()];
        index /= symbols_.size();
    }
    return out;
}

std::size_t Alphabet::kmer_count(std::size_t k) const {
    std::size_t count = 1;
    for (std::size_t i = 0; i < k; ++i) {
        if (count > std::numeric_limits<std::size_t>::max() / symbols_.size()) {
            throw Error(ErrorCode::k_too_large, "k-mer space overflows");
        }
        count *= symbols_.size();
    }
    return count;
}

// ---------------------------------------------------------------------------

Image::Image(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), pixels_(rows * cols, fill) {}

Image::Image(std::size_t rows, std::size_t cols, std::vector<double> pixels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
    if (pixels_.size() != rows * cols) {
        throw Error(ErrorCode::dimension_mismatch, "pixel count does not match image dimensions");
    }
}

std::string describe(const Shape &shape) {
    if (shape.kind == SampleKind::sequence) return "sequence(L=" + std::to_string(shape.cols) + ")";
    return "image(" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + ")";
}

Shape shape_of(const Sample &sample) {
    if (const auto *seq = std::get_if<Sequence>(&sample)) return Shape::sequence(seq->size());
    const auto &img = std::get<Image>(sample);
    return Shape::image(img.rows(), img.cols());
}

void validate_sample(const Sample &sample, const Shape &shape, const Alphabet &alphabet) {
    const Shape actual = shape_of(sample);
    if (actual != shape) {
        throw Error(ErrorCode::shape_mismatch,
                    "expected " + describe(shape) + ", got " + describe(actual));
    }
    if (const auto *seq = std::get_if<Sequence>(&sample)) {
        for (std::size_t i = 0; i < seq->size(); ++i) {
            if (!alphabet.contains((*seq)[i])) {
                throw Error(ErrorCode::symbol_not_in_alphabet,
                            std::string("symbol '") + (*seq)[i] + "' at position " +
                                std::to_string(i + 1) + " not in alphabet " + alphabet.symbols());
            }
        }
        return;
    }
    for (double v : std::get<Image>(sample).pixels()) {
        if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_pixel, "image has a non-finite pixel");
    }
}

// ---------------------------------------------------------------------------

SampleSet::SampleSet(Shape shape, std::vector<Sample> samples, std::uint64_t seed,
                     Alphabet alphabet)
    : shape_(shape), samples_(std::move(samples)), seed_(seed), alphabet_(std::move(alphabet)) {
    if (samples_.empty()) throw Error(ErrorCode::invalid_argument, "sample set must not be empty");
    for (const auto &s : samples_) validate_sample(s, shape_, alphabet_);
}

SampleSet SampleSet::sequences(std::vector<std::string> seqs, Alphabet alphabet, std::uint64_t seed) {
    if (seqs.empty()) throw Error(ErrorCode::invalid_argument, "sample set must not be empty");
    const Shape shape = Shape::sequence(seqs.front().size());
    std::vector<Sample> samples;
    samples.reserve(seqs.size());
    for (auto &s : seqs) samples.emplace_back(std::move(s));
    return SampleSet(shape, std::move(samples), seed, std::move(alphabet));
}

SampleSet SampleSet::images(std::vector<Image> images, std::uint64_t seed) {
    if (images.empty()) throw Error(ErrorCode::invalid_argument, "sample set must not be empty");
    const Shape shape = Shape::image(images.front().rows(), images.front().cols());
    std::vector<Sample> samples;
    samples.reserve(images.size());
    for (auto &im : images) samples.emplace_back(std::move(im));
    return SampleSet(shape, std::move(samples), seed);
}

SampleSet SampleSet::prefix(std::size_t n) const {
    if (n == 0 || n > samples_.size()) {
        throw Error(ErrorCode::invalid_argument, "prefix size " + std::to_string(n) +
                                                     " outside 1.." + std::to_string(samples_.size()));
    }
    return SampleSet(shape_, std::vector<Sample>(samples_.begin(), samples_.begin() + n), seed_,
                     alphabet_);
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
    std::vector<Sample> picked;
    picked.reserve(indices.size());
    for (auto i : indices) {
        if (i >= samples_.size()) throw Error(ErrorCode::out_of_bounds, "subset index out of range");
        picked.push_back(samples_[i]);
    }
    return SampleSet(shape_, std::move(picked), seed_, alphabet_);
}

std::vector<double> Predictor::score_batch(std::span<const Sample> xs) const {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto &x : xs) out.push_back(score(x));
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::exact: return "exact";
    case Strategy::epsilon_band: return "epsilon";
    case Strategy::intervene: return "intervene";
    }
    return "unknown";
}

ConditionSpec ConditionSpec::constant() { return {}; }

ConditionSpec ConditionSpec::pixel(std::size_t row, std::size_t col, double value,
                                   Strategy strategy, double epsilon) {
    return {PixelSelector{row, col}, value, strategy, epsilon};
}

ConditionSpec ConditionSpec::kmer(std::size_t start, std::string value, Strategy strategy) {
    const std::size_t k = value.size();
    return {KmerSelector{start, k}, std::move(value), strategy, 0.05};
}

std::string describe(const ConditionSpec &spec) {
    std::ostringstream os;
    if (std::holds_alternative<ConstantSelector>(spec.selector)) return "constant";
    if (const auto *p = std::get_if<PixelSelector>(&spec.selector)) {
        os << "pixel(" << p->row + 1 << "," << p->col + 1 << ")";
        if (const auto *t = std::get_if<double>(&spec.target)) os << "=" << *t;
    } else {
        const auto &km = std::get<KmerSelector>(spec.selector);
        os << "kmer(" << km.start + 1 << "," << km.k << ")";
        if (const auto *t = std::get_if<std::string>(&spec.target)) os << "=" << *t;
    }
    os << " " << to_string(spec.strategy);
    if (spec.strategy == Strategy::epsilon_band) os << "(" << spec.epsilon << ")";
    return os.str();
}

void validate_condition(const ConditionSpec &spec, const Shape &shape, const Alphabet &alphabet) {
    if (std::holds_alternative<ConstantSelector>(spec.selector)) return;
    if (spec.strategy == Strategy::epsilon_band && !(spec.epsilon > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
    }
    if (const auto *p = std::get_if<PixelSelector>(&spec.selector)) {
        if (shape.kind != SampleKind::image) {
            throw Error(ErrorCode::shape_mismatch, "pixel selector on " + describe(shape));
        }
        if (p->row >= shape.rows || p->col >= shape.cols) {
            throw Error(ErrorCode::out_of_bounds, "pixel selector outside " + describe(shape));
        }
        const auto *t = std::get_if<double>(&spec.target);
        if (t == nullptr || !std::isfinite(*t)) {
            throw Error(ErrorCode::invalid_argument, "pixel condition needs a finite real target");
        }
        return;
    }
    const auto &km = std::get<KmerSelector>(spec.selector);
    if (shape.kind != SampleKind::sequence) {
        throw Error(ErrorCode::shape_mismatch, "k-mer selector on " + describe(shape));
    }
    if (km.k == 0) throw Error(ErrorCode::invalid_argument, "k-mer length must be at least 1");
    if (km.k > shape.cols) throw Error(ErrorCode::k_too_large, "k exceeds sequence length");
    if (km.start + km.k > shape.cols) {
        throw Error(ErrorCode::out_of_bounds, "k-mer window exceeds sequence length");
    }
    if (spec.strategy == Strategy::epsilon_band) {
        throw Error(ErrorCode::invalid_argument, "epsilon-band matching needs a real-valued feature");
    }
    const auto *t = std::get_if<std::string>(&spec.target);
    if (t == nullptr || t->size() != km.k) {
        throw Error(ErrorCode::invalid_argument, "k-mer target must have length k");
    }
    for (char c : *t) {
        if (!alphabet.contains(c)) {
            throw Error(ErrorCode::symbol_not_in_alphabet,
                        std::string("target symbol '") + c + "' not in alphabet " + alphabet.symbols());
        }
    }
}

FeatureValue feature_value(const Selector &selector, const Sample &x) {
    if (const auto *p = std::get_if<PixelSelector>(&selector)) return std::get<Image>(x)(p->row, p->col);
    if (const auto *km = std::get_if<KmerSelector>(&selector)) {
        return std::get<Sequence>(x).substr(km->start, km->k);
    }
    return std::monostate{};
}

Sample intervene(const Sample &x, const Selector &selector, const FeatureValue &value) {
    Sample out = x;
    if (const auto *p = std::get_if<PixelSelector>(&selector)) {
        std::get<Image>(out)(p->row, p->col) = std::get<double>(value);
    } else if (const auto *km = std::get_if<KmerSelector>(&selector)) {
        std::get<Sequence>(out).replace(km->start, km->k, std::get<std::string>(value));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string describe(const ExplanationMode &mode) {
    switch (mode.variant) {
    case ExplanationMode::Variant::unit: return "unit";
    case ExplanationMode::Variant::identity_image: return "identity-image";
    case ExplanationMode::Variant::sparse_pwm: return "sparse-pwm(k=" + std::to_string(mode.k) + ")";
    }
    return "unknown";
}

Layout Layout::positional(std::size_t length, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::invalid_argument, "window length must be at least 1");
    if (k > length) throw Error(ErrorCode::k_too_large, "k exceeds sequence length");
    return {Kind::positional, 1, length - k + 1, k};
}

Layout Layout::po_matrix(const Alphabet &alphabet, std::size_t k, std::size_t length) {
    if (k == 0) throw Error(ErrorCode::invalid_argument, "k-mer length must be at least 1");
    if (k > length) throw Error(ErrorCode::k_too_large, "k exceeds sequence length");
    return {Kind::po_matrix, alphabet.kmer_count(k), length - k + 1, k};
}

Layout layout_for(const ExplanationMode &mode, const Shape &shape, const Alphabet &alphabet) {
    switch (mode.variant) {
    case ExplanationMode::Variant::unit: return Layout::scalar();
    case ExplanationMode::Variant::identity_image:
        if (shape.kind != SampleKind::image) {
            throw Error(ErrorCode::shape_mismatch, "identity-image mode on " + describe(shape));
        }
        return Layout::grid(shape.rows, shape.cols);
    case ExplanationMode::Variant::sparse_pwm:
        if (shape.kind != SampleKind::sequence) {
            throw Error(ErrorCode::shape_mismatch, "sparse-pwm mode on " + describe(shape));
        }
        return Layout::po_matrix(alphabet, mode.k, shape.cols);
    }
    throw Error(ErrorCode::invalid_argument, "unknown explanation mode");
}

std::vector<FeatureCoord> enumerate_pos(const Layout &layout) {
    std::vector<FeatureCoord> out;
    out.reserve(layout.size());
    if (layout.kind == Layout::Kind::po_matrix) {
        // position-major: every k-mer at position 1, then position 2, ...
        for (std::size_t c = 0; c < layout.cols; ++c)
            for (std::size_t r = 0; r < layout.rows; ++r) out.push_back({r, c});
        return out;
    }
    for (std::size_t r = 0; r < layout.rows; ++r)
        for (std::size_t c = 0; c < layout.cols; ++c) out.push_back({r, c});
    return out;
}

std::vector<FeatureCoord> enumerate_pos(const ExplanationMode &mode, const Shape &shape,
                                        const Alphabet &alphabet) {
    return enumerate_pos(layout_for(mode, shape, alphabet));
}

// ---------------------------------------------------------------------------

ImportanceMap::ImportanceMap(Layout layout_, MapMetadata meta_, Alphabet alphabet_)
    : layout(layout_), values(layout_.size()), meta(std::move(meta_)), alphabet(std::move(alphabet_)) {}

std::size_t ImportanceMap::present_count() const {
    std::size_t n = 0;
    for (const auto &v : values) n += v.has_value();
    return n;
}

std::optional<std::size_t> ImportanceMap::argmax() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] && (!best || *values[i] > *values[*best])) best = i;
    }
    return best;
}

double frobenius_norm(const ImportanceMap &map) {
    double sum = 0.0;
    for (const auto &v : map.values)
        if (v) sum += *v * *v;
    return std::sqrt(sum);
}

double frobenius_distance(const ImportanceMap &a, const ImportanceMap &b) {
    if (a.layout != b.layout) throw Error(ErrorCode::layout_mismatch, "maps have different layouts");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] && b.values[i]) {
            const double d = *a.values[i] - *b.values[i];
            sum += d * d;
        }
    }
    return std::sqrt(sum);
}

}  // namespace mfi
