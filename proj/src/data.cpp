#include "mfi/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "text.hpp"

namespace mfi {

namespace {

std::ifstream open_input(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    return out;
}

void finish_output(std::ofstream &out, const std::filesystem::path &path) {
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

[[noreturn]] void bad_row(std::size_t line_no, const std::string &what) {
    throw Error(ErrorCode::malformed_row, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<MotifSpec> default_motifs(double mutation_rate) {
    return {{"GGCCGTAAA", 11, mutation_rate}, {"TTTCACGTTGA", 24, mutation_rate}};
}

LabeledSet SequenceData::combined() const {
    std::vector<Sample> samples;
    std::vector<int> labels;
    samples.reserve(positives.size() + negatives.size());
    for (std::size_t i = 0; i < std::max(positives.size(), negatives.size()); ++i) {
        if (i < positives.size()) {
            samples.push_back(positives[i]);
            labels.push_back(1);
        }
        if (i < negatives.size()) {
            samples.push_back(negatives[i]);
            labels.push_back(-1);
        }
    }
    return {SampleSet(positives.shape(), std::move(samples), positives.seed(), positives.alphabet()),
            std::move(labels)};
}

SequenceData gen_sequences(std::size_t n, std::size_t length, std::span<const MotifSpec> motifs,
                           std::uint64_t seed, const Alphabet &alphabet) {
    if (n == 0) throw Error(ErrorCode::invalid_argument, "n must be at least 1");
    if (length == 0) throw Error(ErrorCode::invalid_argument, "sequence length must be at least 1");
    for (const auto &m : motifs) {
        if (m.pattern.empty() || m.position == 0 || m.position - 1 + m.pattern.size() > length) {
            throw Error(ErrorCode::motif_overflow, "motif " + m.pattern + " at " + std::to_string(m.position) +
                                                       " does not fit length " + std::to_string(length));
        }
        if (!(m.mutation_rate >= 0.0 && m.mutation_rate < 1.0)) {
            throw Error(ErrorCode::invalid_argument, "mutation rate must lie in [0, 1)");
        }
        for (char c : m.pattern) {
            if (!alphabet.contains(c)) {
                throw Error(ErrorCode::symbol_not_in_alphabet, std::string("motif symbol '") + c + "'");
            }
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> symbol(0, alphabet.size() - 1);
    std::uniform_int_distribution<std::size_t> other(1, alphabet.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto background = [&] {
        std::string s(length, ' ');
        for (auto &c : s) c = alphabet.symbol(symbol(rng));
        return s;
    };

    std::vector<std::string> pos, neg;
    pos.reserve(n);
    neg.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string s = background();
        for (const auto &m : motifs) {
            for (std::size_t p = 0; p < m.pattern.size(); ++p) {
                char c = m.pattern[p];
                if (unit(rng) < m.mutation_rate) {
                    // shift by 1..|alphabet|-1 so the substitute always differs
                    const auto idx = static_cast<std::size_t>(alphabet.index(c));
                    c = alphabet.symbol((idx + other(rng)) % alphabet.size());
                }
                s[m.position - 1 + p] = c;
            }
        }
        pos.push_back(std::move(s));
        neg.push_back(background());
    }
    return {SampleSet::sequences(std::move(pos), alphabet, seed), SampleSet::sequences(std::move(neg), alphabet, seed)};
}

// ---------------------------------------------------------------------------

GlyphSpec GlyphSpec::standard(std::size_t rows, std::size_t cols, double noise) {
    if (rows < 8 || cols < 8) throw Error(ErrorCode::invalid_argument, "glyphs need at least 8x8 pixels");
    if (!(noise >= 0.0)) throw Error(ErrorCode::invalid_argument, "noise must be non-negative");
    GlyphSpec spec{rows, cols, noise, {}};
    const Image three = glyph_template(spec, GlyphClass::three);
    const std::size_t stroke = std::max<std::size_t>(1, std::min(rows, cols) / 8);
    const std::size_t left = cols / 4;
    const std::size_t top = rows / 8;
    const std::size_t bottom = rows - rows / 8 - 1;
    for (std::size_t r = top; r <= bottom; ++r) {
        for (std::size_t c = left; c < left + stroke; ++c) {
            if (three(r, c) == 0.0) spec.bridge.emplace_back(r, c);
        }
    }
    return spec;
}

Image glyph_template(const GlyphSpec &spec, GlyphClass cls) {
    const std::size_t rows = spec.rows, cols = spec.cols;
    Image img(rows, cols, 0.0);
    const std::size_t stroke = std::max<std::size_t>(1, std::min(rows, cols) / 8);
    const std::size_t left = cols / 4;
    const std::size_t right = cols - cols / 4 - 1;
    const std::size_t top = rows / 8;
    const std::size_t bottom = rows - rows / 8 - 1;
    const std::size_t middle = rows / 2 - stroke / 2;
    auto bar = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
        for (std::size_t r = r0; r <= r1 && r < rows; ++r)
            for (std::size_t c = c0; c <= c1 && c < cols; ++c) img(r, c) = 1.0;
    };
    bar(top, top + stroke - 1, left, right);                    // upper bar
    bar(middle, middle + stroke - 1, left + stroke, right);     // middle bar
    bar(bottom - stroke + 1, bottom, left, right);              // lower bar
    bar(top, bottom, right - stroke + 1, right);                // right spine
    if (cls == GlyphClass::eight) {
        for (const auto &[r, c] : spec.bridge) {
            if (r >= rows || c >= cols) throw Error(ErrorCode::out_of_bounds, "bridge pixel outside the glyph");
            img(r, c) = 1.0;
        }
    }
    return img;
}

LabeledSet gen_glyphs(std::size_t n_per_class, const GlyphSpec &spec, std::uint64_t seed) {
    if (n_per_class == 0) throw Error(ErrorCode::invalid_argument, "n must be at least 1");
    for (const auto &[r, c] : spec.bridge) {
        if (r >= spec.rows || c >= spec.cols) throw Error(ErrorCode::out_of_bounds, "bridge pixel outside the glyph");
    }
    const Image three = glyph_template(spec, GlyphClass::three);
    const Image eight = glyph_template(spec, GlyphClass::eight);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<Image> images;
    std::vector<int> labels;
    images.reserve(2 * n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        for (const auto *base : {&three, &eight}) {
            Image img = *base;
            if (spec.noise > 0.0) {
                for (auto &p : img.pixels()) p = std::clamp(p + spec.noise * noise(rng), 0.0, 1.0);
            }
            images.push_back(std::move(img));
            labels.push_back(base == &eight ? 1 : -1);
        }
    }
    return {SampleSet::images(std::move(images), seed), std::move(labels)};
}

LabeledSet subsample(const LabeledSet &data, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(data.samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, idx.size()));
    std::vector<Sample> samples;
    std::vector<int> labels;
    for (auto i : idx) {
        samples.push_back(data.samples[i]);
        labels.push_back(data.labels[i]);
    }
    return {SampleSet(data.samples.shape(), std::move(samples), seed, data.samples.alphabet()), std::move(labels)};
}

// ---------------------------------------------------------------------------

LabeledSet load_images_csv(std::istream &in, std::uint64_t seed) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw Error(ErrorCode::malformed_file, "empty image file");
    ++line_no;
    const auto header = text::split(text::trim(line), ',');
    if (header.size() < 2 || text::trim(header[0]) != "label") {
        bad_row(line_no, "header must start with 'label' followed by pixel columns");
    }
    std::size_t rows = 0, cols = 0;
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto name = text::trim(header[c]);
        const auto parts = text::split(name, '_');
        std::optional<std::size_t> i, j;
        if (parts.size() == 3 && parts[0] == "p") {
            i = text::parse_int<std::size_t>(parts[1]);
            j = text::parse_int<std::size_t>(parts[2]);
        }
        if (!i || !j) bad_row(line_no, "unreadable pixel column '" + std::string(name) + "'");
        coords.emplace_back(*i, *j);
        rows = std::max(rows, *i + 1);
        cols = std::max(cols, *j + 1);
    }
    if (coords.size() != rows * cols) {
        throw Error(ErrorCode::inconsistent_dimensions, "pixel columns do not form a full " +
                                                            std::to_string(rows) + "x" + std::to_string(cols) + " grid");
    }
    for (std::size_t p = 0; p < coords.size(); ++p) {
        if (coords[p] != std::pair{p / cols, p % cols}) {
            throw Error(ErrorCode::inconsistent_dimensions, "pixel columns are not in row-major order");
        }
    }

    std::vector<std::vector<double>> pixels;
    std::vector<int> labels;
    double max_value = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        const auto cells = text::split(body, ',');
        if (cells.size() != header.size()) {
            bad_row(line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                 std::to_string(cells.size()));
        }
        const auto label = text::parse_int<int>(cells[0]);
        if (!label) bad_row(line_no, "unreadable label '" + std::string(cells[0]) + "'");
        std::vector<double> px;
        px.reserve(rows * cols);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto v = text::parse_double(cells[c]);
            if (!v || !std::isfinite(*v)) bad_row(line_no, "non-finite pixel '" + std::string(cells[c]) + "'");
            if (*v < 0.0 || *v > 255.0) bad_row(line_no, "pixel intensity outside [0, 255]");
            max_value = std::max(max_value, *v);
            px.push_back(*v);
        }
        pixels.push_back(std::move(px));
        labels.push_back(*label);
    }
    if (pixels.empty()) throw Error(ErrorCode::malformed_file, "image file has no data rows");

    const double scale = max_value > 1.0 ? 1.0 / 255.0 : 1.0;
    std::vector<Image> images;
    images.reserve(pixels.size());
    for (auto &px : pixels) {
        if (scale != 1.0)
            for (auto &v : px) v *= scale;
        images.emplace_back(rows, cols, std::move(px));
    }
    return {SampleSet::images(std::move(images), seed), std::move(labels)};
}

LabeledSet load_images_csv(const std::filesystem::path &path, std::uint64_t seed) {
    auto in = open_input(path);
    return load_images_csv(in, seed);
}

void save_images_csv(const LabeledSet &data, std::ostream &out) {
    const Shape &shape = data.samples.shape();
    if (shape.kind != SampleKind::image) throw Error(ErrorCode::shape_mismatch, "image CSV needs images");
    out << "label";
    for (std::size_t r = 0; r < shape.rows; ++r)
        for (std::size_t c = 0; c < shape.cols; ++c) out << ",p_" << r << '_' << c;
    out << '\n';
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        out << (i < data.labels.size() ? data.labels[i] : 0);
        for (double v : std::get<Image>(data.samples[i]).pixels()) out << ',' << text::format_double(v);
        out << '\n';
    }
}

void save_images_csv(const LabeledSet &data, const std::filesystem::path &path) {
    auto out = open_output(path);
    save_images_csv(data, out);
    finish_output(out, path);
}

LabeledSet load_fasta(std::istream &in, const Alphabet &alphabet, std::uint64_t seed) {
    std::vector<std::string> seqs;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    bool open_record = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        if (body.front() == '>') {
            int label = 0;
            std::istringstream hs{std::string(body.substr(1))};
            std::string token;
            while (hs >> token) {
                if (token.rfind("label=", 0) == 0) {
                    const auto v = text::parse_int<int>(std::string_view(token).substr(6));
                    if (!v) bad_row(line_no, "unreadable label '" + token + "'");
                    label = *v;
                }
            }
            seqs.emplace_back();
            labels.push_back(label);
            open_record = true;
            continue;
        }
        if (!open_record) bad_row(line_no, "sequence data before the first '>' header");
        for (char c : body) {
            if (!alphabet.contains(c)) {
                bad_row(line_no, std::string("symbol '") + c + "' not in alphabet " + alphabet.symbols());
            }
        }
        seqs.back().append(body);
    }
    if (seqs.empty()) throw Error(ErrorCode::malformed_file, "sequence file has no records");
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        if (seqs[i].size() != seqs.front().size() || seqs[i].empty()) {
            throw Error(ErrorCode::inconsistent_dimensions,
                        "record " + std::to_string(i + 1) + " has length " + std::to_string(seqs[i].size()) +
                            ", expected " + std::to_string(seqs.front().size()));
        }
    }
    return {SampleSet::sequences(std::move(seqs), alphabet, seed), std::move(labels)};
}

LabeledSet load_fasta(const std::filesystem::path &path, const Alphabet &alphabet, std::uint64_t seed) {
    auto in = open_input(path);
    return load_fasta(in, alphabet, seed);
}

void save_fasta(const LabeledSet &data, std::ostream &out) {
    if (data.samples.kind() != SampleKind::sequence) throw Error(ErrorCode::shape_mismatch, "FASTA needs sequences");
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const int label = i < data.labels.size() ? data.labels[i] : 0;
        out << ">seq" << i + 1 << " label=" << (label > 0 ? "+" : "") << label << '\n'
            << std::get<Sequence>(data.samples[i]) << '\n';
    }
}

void save_fasta(const LabeledSet &data, const std::filesystem::path &path) {
    auto out = open_output(path);
    save_fasta(data, out);
    finish_output(out, path);
}

LabeledSet load_samples(const std::filesystem::path &path, std::uint64_t seed) {
    if (path.extension() == ".csv") return load_images_csv(path, seed);
    return load_fasta(path, Alphabet{}, seed);
}

// ---------------------------------------------------------------------------

namespace {

std::string_view layout_name(Layout::Kind kind) {
    switch (kind) {
    case Layout::Kind::scalar: return "scalar";
    case Layout::Kind::grid: return "grid";
    case Layout::Kind::positional: return "positional";
    case Layout::Kind::po_matrix: return "po-matrix";
    }
    return "unknown";
}

std::string format_value(const std::optional<double> &v) { return v ? text::format_double(*v) : std::string(); }

}  // namespace

void write_importance(const ImportanceMap &map, std::ostream &out) {
    const Layout &l = map.layout;
    out << "# layout: " << layout_name(l.kind) << ' ' << l.rows << ' ' << l.cols << ' ' << l.k << '\n';
    out << "# alphabet: " << map.alphabet.symbols() << '\n';
    out << "# mode: " << map.meta.mode << '\n';
    out << "# condition: " << map.meta.condition << '\n';
    out << "# seed: " << map.meta.seed << '\n';
    out << "# n: " << map.meta.n << '\n';
    switch (l.kind) {
    case Layout::Kind::scalar: out << "value\n" << format_value(map.values[0]) << '\n'; break;
    case Layout::Kind::grid:
        out << "i,j,value\n";
        for (const auto &c : enumerate_pos(l)) {
            out << c.row + 1 << ',' << c.col + 1 << ',' << format_value(map.at(c.row, c.col)) << '\n';
        }
        break;
    case Layout::Kind::positional:
        out << "position,value\n";
        for (std::size_t c = 0; c < l.cols; ++c) out << c + 1 << ',' << format_value(map.values[c]) << '\n';
        break;
    case Layout::Kind::po_matrix:
        out << "kmer,position,value\n";
        for (const auto &c : enumerate_pos(l)) {
            out << map.alphabet.kmer(c.row, l.k) << ',' << c.col + 1 << ',' << format_value(map.at(c.row, c.col))
                << '\n';
        }
        break;
    }
}

void write_importance(const ImportanceMap &map, const std::filesystem::path &path) {
    auto out = open_output(path);
    write_importance(map, out);
    finish_output(out, path);
}

ImportanceMap read_importance(std::istream &in) {
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::string> meta;
    while (in.peek() == '#' && std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(std::string_view(line).substr(1));
        const auto colon = body.find(':');
        if (colon == std::string_view::npos) continue;
        meta[std::string(text::trim(body.substr(0, colon)))] = std::string(text::trim(body.substr(colon + 1)));
    }
    if (!meta.contains("layout")) throw Error(ErrorCode::malformed_file, "importance map lacks a layout line");

    Layout layout;
    {
        std::istringstream ls(meta["layout"]);
        std::string kind;
        ls >> kind >> layout.rows >> layout.cols >> layout.k;
        if (!ls) throw Error(ErrorCode::malformed_file, "unreadable layout '" + meta["layout"] + "'");
        if (kind == "scalar") layout.kind = Layout::Kind::scalar;
        else if (kind == "grid") layout.kind = Layout::Kind::grid;
        else if (kind == "positional") layout.kind = Layout::Kind::positional;
        else if (kind == "po-matrix") layout.kind = Layout::Kind::po_matrix;
        else throw Error(ErrorCode::malformed_file, "unknown layout '" + kind + "'");
    }
    Alphabet alphabet;
    if (meta.contains("alphabet")) {
        try {
            alphabet = Alphabet(meta["alphabet"]);
        } catch (const Error &e) {
            throw Error(ErrorCode::malformed_file, e.what());
        }
    }
    MapMetadata md;
    md.mode = meta["mode"];
    md.condition = meta["condition"];
    if (auto s = text::parse_int<std::uint64_t>(meta["seed"])) md.seed = *s;
    if (auto n = text::parse_int<std::size_t>(meta["n"])) md.n = *n;
    ImportanceMap map(layout, md, alphabet);

    if (!std::getline(in, line)) throw Error(ErrorCode::malformed_file, "importance map lacks a header");
    ++line_no;
    const std::size_t columns = text::split(text::trim(line), ',').size();
    std::size_t rows_read = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(text::trim(line), ',');
        if (cells.size() != columns) {
            bad_row(line_no, "expected " + std::to_string(columns) + " columns, got " + std::to_string(cells.size()));
        }
        std::size_t flat = 0;
        switch (layout.kind) {
        case Layout::Kind::scalar: flat = 0; break;
        case Layout::Kind::grid: {
            const auto i = text::parse_int<std::size_t>(cells[0]);
            const auto j = text::parse_int<std::size_t>(cells[1]);
            if (!i || !j || *i < 1 || *j < 1 || *i > layout.rows || *j > layout.cols) bad_row(line_no, "bad pixel index");
            flat = (*i - 1) * layout.cols + (*j - 1);
            break;
        }
        case Layout::Kind::positional: {
            const auto p = text::parse_int<std::size_t>(cells[0]);
            if (!p || *p < 1 || *p > layout.cols) bad_row(line_no, "bad position");
            flat = *p - 1;
            break;
        }
        case Layout::Kind::po_matrix: {
            const auto kmer = text::trim(cells[0]);
            const auto p = text::parse_int<std::size_t>(cells[1]);
            if (kmer.size() != layout.k || !p || *p < 1 || *p > layout.cols) bad_row(line_no, "bad k-mer or position");
            try {
                flat = alphabet.kmer_index(kmer) * layout.cols + (*p - 1);
            } catch (const Error &) {
                bad_row(line_no, "k-mer '" + std::string(kmer) + "' not over the alphabet");
            }
            break;
        }
        }
        const auto cell = text::trim(cells.back());
        if (!cell.empty()) {
            const auto v = text::parse_double(cell);
            if (!v || !std::isfinite(*v)) bad_row(line_no, "unreadable value '" + std::string(cell) + "'");
            map.values[flat] = *v;
        }
        ++rows_read;
    }
    if (rows_read != layout.size()) {
        throw Error(ErrorCode::inconsistent_dimensions, "expected " + std::to_string(layout.size()) +
                                                            " rows, got " + std::to_string(rows_read));
    }
    return map;
}

ImportanceMap read_importance(const std::filesystem::path &path) {
    auto in = open_input(path);
    return read_importance(in);
}

void write_pgm(const ImportanceMap &map, std::ostream &out) {
    if (map.layout.kind != Layout::Kind::grid) throw Error(ErrorCode::layout_mismatch, "PGM heatmaps need a grid map");
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto &v : map.values) {
        if (!v) continue;
        lo = any ? std::min(lo, *v) : *v;
        hi = any ? std::max(hi, *v) : *v;
        any = true;
    }
    out << "P5\n" << map.layout.cols << ' ' << map.layout.rows << "\n255\n";
    for (const auto &v : map.values) {
        unsigned char byte = 0;
        if (v && hi > lo) byte = static_cast<unsigned char>(std::lround(255.0 * (*v - lo) / (hi - lo)));
        out.put(static_cast<char>(byte));
    }
}

void write_pgm(const ImportanceMap &map, const std::filesystem::path &path) {
    auto out = open_output(path);
    write_pgm(map, out);
    finish_output(out, path);
}

}  // namespace mfi
