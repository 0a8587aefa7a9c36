#pragma once

// Shared domain types: alphabets, samples, sample sets, the predictor
// interface, conditioning specs, explanation modes and importance maps.
//
// Internal indices (positions, rows, columns) are 0-based. Conversion to the
// 1-based positions used in files and on the command line happens at the I/O
// boundary.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mfi {

enum class ErrorCode {
    invalid_argument = 1,
    shape_mismatch,
    symbol_not_in_alphabet,
    non_finite_pixel,
    k_too_large,
    dimension_mismatch,
    incompatible_kernel,
    empty_conditioned_set,
    too_few_samples,
    singular_system,
    label_count_mismatch,
    process_failure,
    timeout,
    unparseable_response,
    malformed_file,
    version_mismatch,
    malformed_row,
    inconsistent_dimensions,
    io_error,
    motif_overflow,
    out_of_bounds,
    layout_mismatch,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Ordered set of distinct symbols; the index of a symbol never changes.
class Alphabet {
public:
    Alphabet();  // A, C, G, T
    explicit Alphabet(std::string symbols);

    std::size_t size() const noexcept { return symbols_.size(); }
    const std::string &symbols() const noexcept { return symbols_; }
    bool contains(char c) const noexcept { return index(c) >= 0; }
    int index(char c) const noexcept { return lookup_[static_cast<unsigned char>(c)]; }
    char symbol(std::size_t i) const;

    /// Base-|alphabet| rank of a k-mer, first character most significant.
    std::size_t kmer_index(std::string_view kmer) const;
    std::string kmer(std::size_t index, std::size_t k) const;
    /// |alphabet|^k, throws on overflow.
    std::size_t kmer_count(std::size_t k) const;

    bool operator==(const Alphabet &other) const noexcept { return symbols_ == other.symbols_; }

private:
    std::string symbols_;
    std::array<int, 256> lookup_{};
};

/// Row-major real matrix of pixel intensities.
class Image {
public:
    Image() = default;
    Image(std::size_t rows, std::size_t cols, double fill = 0.0);
    Image(std::size_t rows, std::size_t cols, std::vector<double> pixels);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    double operator()(std::size_t r, std::size_t c) const { return pixels_[r * cols_ + c]; }
    double &operator()(std::size_t r, std::size_t c) { return pixels_[r * cols_ + c]; }
    double operator[](std::size_t flat) const { return pixels_[flat]; }
    double &operator[](std::size_t flat) { return pixels_[flat]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }

    bool operator==(const Image &) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> pixels_;
};

using Sequence = std::string;
using Sample = std::variant<Sequence, Image>;

enum class SampleKind { sequence, image };

/// Sequences have rows == 1 and cols == L.
struct Shape {
    SampleKind kind = SampleKind::sequence;
    std::size_t rows = 1;
    std::size_t cols = 0;

    static Shape sequence(std::size_t length) { return {SampleKind::sequence, 1, length}; }
    static Shape image(std::size_t rows, std::size_t cols) { return {SampleKind::image, rows, cols}; }

    std::size_t size() const noexcept { return rows * cols; }
    bool operator==(const Shape &) const = default;
};

std::string describe(const Shape &shape);
Shape shape_of(const Sample &sample);

/// Throws shape_mismatch, symbol_not_in_alphabet or non_finite_pixel.
void validate_sample(const Sample &sample, const Shape &shape, const Alphabet &alphabet = {});

/// Homogeneous, immutable collection of samples (the empirical set Z).
class SampleSet {
public:
    SampleSet(Shape shape, std::vector<Sample> samples, std::uint64_t seed = 0,
              Alphabet alphabet = {});

    static SampleSet sequences(std::vector<std::string> seqs, Alphabet alphabet = {},
                               std::uint64_t seed = 0);
    static SampleSet images(std::vector<Image> images, std::uint64_t seed = 0);

    std::size_t size() const noexcept { return samples_.size(); }
    const Sample &operator[](std::size_t i) const { return samples_[i]; }
    std::span<const Sample> samples() const noexcept { return samples_; }
    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

    const Shape &shape() const noexcept { return shape_; }
    const Alphabet &alphabet() const noexcept { return alphabet_; }
    std::uint64_t seed() const noexcept { return seed_; }
    SampleKind kind() const noexcept { return shape_.kind; }

    SampleSet prefix(std::size_t n) const;
    SampleSet subset(std::span<const std::size_t> indices) const;

private:
    Shape shape_;
    std::vector<Sample> samples_;
    std::uint64_t seed_ = 0;
    Alphabet alphabet_;
};

struct LabeledSet {
    SampleSet samples;
    std::vector<int> labels;  // +1 / -1
};

/// Black-box scoring function. Implementations must be deterministic and
/// safe to call from several threads.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual double score(const Sample &x) const = 0;
    virtual std::vector<double> score_batch(std::span<const Sample> xs) const;
};

// ---------------------------------------------------------------------------
// Conditioning

struct ConstantSelector {
    bool operator==(const ConstantSelector &) const = default;
};
struct PixelSelector {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const PixelSelector &) const = default;
};
struct KmerSelector {
    std::size_t start = 0;  // 0-based
    std::size_t k = 1;
    bool operator==(const KmerSelector &) const = default;
};
using Selector = std::variant<ConstantSelector, PixelSelector, KmerSelector>;

/// Value of a feature f(x): none (constant selector), a pixel intensity, or a k-mer.
using FeatureValue = std::variant<std::monostate, double, std::string>;

enum class Strategy { exact, epsilon_band, intervene };

std::string_view to_string(Strategy s);

struct ConditionSpec {
    Selector selector = ConstantSelector{};
    FeatureValue target{};
    Strategy strategy = Strategy::exact;
    double epsilon = 0.05;

    static ConditionSpec constant();
    static ConditionSpec pixel(std::size_t row, std::size_t col, double value,
                               Strategy strategy = Strategy::intervene, double epsilon = 0.05);
    static ConditionSpec kmer(std::size_t start, std::string value,
                              Strategy strategy = Strategy::exact);
};

std::string describe(const ConditionSpec &spec);
void validate_condition(const ConditionSpec &spec, const Shape &shape,
                        const Alphabet &alphabet = {});
FeatureValue feature_value(const Selector &selector, const Sample &x);
/// Copy of x with the selected coordinates overwritten by value.
Sample intervene(const Sample &x, const Selector &selector, const FeatureValue &value);

// ---------------------------------------------------------------------------
// Explanation modes and map layouts

struct ExplanationMode {
    enum class Variant { unit, identity_image, sparse_pwm };
    Variant variant = Variant::unit;
    std::size_t k = 0;  // k-mer length for sparse_pwm

    static ExplanationMode unit() { return {Variant::unit, 0}; }
    static ExplanationMode identity_image() { return {Variant::identity_image, 0}; }
    static ExplanationMode sparse_pwm(std::size_t k) { return {Variant::sparse_pwm, k}; }

    bool operator==(const ExplanationMode &) const = default;
};

std::string describe(const ExplanationMode &mode);

struct Layout {
    enum class Kind { scalar, grid, positional, po_matrix };
    Kind kind = Kind::scalar;
    std::size_t rows = 1;
    std::size_t cols = 1;
    std::size_t k = 0;  // window or k-mer length for positional / po_matrix

    static Layout scalar() { return {Kind::scalar, 1, 1, 0}; }
    static Layout grid(std::size_t d1, std::size_t d2) { return {Kind::grid, d1, d2, 0}; }
    /// One entry per window start of a length-k window on a sequence of length L.
    static Layout positional(std::size_t length, std::size_t k = 1);
    static Layout po_matrix(const Alphabet &alphabet, std::size_t k, std::size_t length);

    std::size_t size() const noexcept { return rows * cols; }
    bool operator==(const Layout &) const = default;
};

/// (row, col) in the layout; positional entries use row 0, po-matrix rows are k-mer ranks.
struct FeatureCoord {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const FeatureCoord &) const = default;
};

/// Output layout of phi for samples of the given shape. Throws k_too_large.
Layout layout_for(const ExplanationMode &mode, const Shape &shape, const Alphabet &alphabet = {});
std::vector<FeatureCoord> enumerate_pos(const Layout &layout);
std::vector<FeatureCoord> enumerate_pos(const ExplanationMode &mode, const Shape &shape,
                                        const Alphabet &alphabet = {});

struct MapMetadata {
    std::string mode;
    std::string condition;
    std::uint64_t seed = 0;
    std::size_t n = 0;
};

/// Estimated importance values; missing entries come from empty conditioned subsets.
struct ImportanceMap {
    Layout layout;
    std::vector<std::optional<double>> values;
    MapMetadata meta;
    Alphabet alphabet;

    ImportanceMap() = default;
    ImportanceMap(Layout layout, MapMetadata meta = {}, Alphabet alphabet = {});

    std::optional<double> at(std::size_t row, std::size_t col) const {
        return values[row * layout.cols + col];
    }
    std::size_t present_count() const;
    /// Flat index of the largest present value; ties go to the lowest index.
    std::optional<std::size_t> argmax() const;
    FeatureCoord coord(std::size_t flat) const { return {flat / layout.cols, flat % layout.cols}; }
};

/// Frobenius norm over present entries.
double frobenius_norm(const ImportanceMap &map);
/// Frobenius distance over entries present in both maps.
double frobenius_distance(const ImportanceMap &a, const ImportanceMap &b);

/// Runs body(i) for i in [0, count) on up to `threads` workers.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body &&body);

}  // namespace mfi

#include "mfi/detail/parallel.hpp"
