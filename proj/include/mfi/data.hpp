#pragma once

// Synthetic data generators and the file formats: image CSV, FASTA-like
// sequence files, importance-map CSV and PGM heatmaps.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfi/core.hpp"

namespace mfi {

/// A pattern planted at a 1-based position; every character is independently
/// replaced by a different symbol with probability mutation_rate.
struct MotifSpec {
    std::string pattern;
    std::size_t position = 1;
    double mutation_rate = 0.0;
};

inline constexpr std::size_t default_sequence_length = 45;
inline constexpr double default_mutation_rate = 0.1;

/// GGCCGTAAA at position 11 and TTTCACGTTGA at position 24.
std::vector<MotifSpec> default_motifs(double mutation_rate = default_mutation_rate);

struct SequenceData {
    SampleSet positives;
    SampleSet negatives;

    /// Positives and negatives interleaved (+, -, +, ...), labels +1 / -1.
    LabeledSet combined() const;
};

/// n positives (uniform background plus motifs) and n uniform negatives.
/// Throws invalid_argument for n == 0 and motif_overflow.
SequenceData gen_sequences(std::size_t n, std::size_t length, std::span<const MotifSpec> motifs,
                           std::uint64_t seed, const Alphabet &alphabet = {});

enum class GlyphClass { three, eight };

struct GlyphSpec {
    std::size_t rows = 16;
    std::size_t cols = 16;
    double noise = 0.1;  // standard deviation of additive Gaussian noise
    std::vector<std::pair<std::size_t, std::size_t>> bridge;  // 0-based (row, col)

    /// Block-letter "3"; the "8" additionally fills the left-hand bridge strokes.
    static GlyphSpec standard(std::size_t rows = 16, std::size_t cols = 16, double noise = 0.1);
};

Image glyph_template(const GlyphSpec &spec, GlyphClass cls);

/// n_per_class glyphs of each class, interleaved three/eight; eight = +1, three = -1.
LabeledSet gen_glyphs(std::size_t n_per_class, const GlyphSpec &spec, std::uint64_t seed);

/// Random subset of size min(n, |data|) in shuffled order, labels follow.
LabeledSet subsample(const LabeledSet &data, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Image CSV: header label,p_0_0,p_0_1,...; one image per row. Intensities above
// 1 are read as 8-bit values and divided by 255.

LabeledSet load_images_csv(std::istream &in, std::uint64_t seed = 0);
LabeledSet load_images_csv(const std::filesystem::path &path, std::uint64_t seed = 0);
void save_images_csv(const LabeledSet &data, std::ostream &out);
void save_images_csv(const LabeledSet &data, const std::filesystem::path &path);

// FASTA-like sequences: ">name label=+1" header, sequence on the following line(s).
LabeledSet load_fasta(std::istream &in, const Alphabet &alphabet = {}, std::uint64_t seed = 0);
LabeledSet load_fasta(const std::filesystem::path &path, const Alphabet &alphabet = {}, std::uint64_t seed = 0);
void save_fasta(const LabeledSet &data, std::ostream &out);
void save_fasta(const LabeledSet &data, const std::filesystem::path &path);

/// Reads either format, chosen by extension (.csv for images, anything else FASTA).
LabeledSet load_samples(const std::filesystem::path &path, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Importance maps: "# key: value" metadata lines, then a layout-specific CSV
// (grid: i,j,value; positional: position,value; po-matrix: kmer,position,value;
// scalar: value). Positions are 1-based; missing values are empty fields.

void write_importance(const ImportanceMap &map, std::ostream &out);
void write_importance(const ImportanceMap &map, const std::filesystem::path &path);
ImportanceMap read_importance(std::istream &in);
ImportanceMap read_importance(const std::filesystem::path &path);

/// 8-bit binary PGM of a grid map, min-max scaled; missing pixels are black.
void write_pgm(const ImportanceMap &map, std::ostream &out);
void write_pgm(const ImportanceMap &map, const std::filesystem::path &path);

}  // namespace mfi
