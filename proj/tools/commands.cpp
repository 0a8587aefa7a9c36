#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mfi/data.hpp"
#include "mfi/estimator.hpp"
#include "mfi/eval.hpp"
#include "mfi/external_predictor.hpp"
#include "mfi/predictors.hpp"

namespace mfi::cli {

namespace {

namespace fs = std::filesystem;

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Common {
    std::uint64_t seed = 0;
    std::size_t n = 1000;
    std::string out;
    unsigned threads = default_threads();
};

void add_common(CLI::App &cmd, Common &c, bool out_required = true) {
    cmd.add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd.add_option("--n", c.n, "Sample size")->capture_default_str()->check(CLI::PositiveNumber);
    auto *out = cmd.add_option("--out", c.out, "Output file");
    if (out_required) out->required();
    cmd.add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

/// Predictor source shared by explain, morf and converge.
struct PredictorArgs {
    std::string model;
    std::string external;
    double timeout = 30.0;

    void add(CLI::App &cmd) {
        auto *m = cmd.add_option("--model", model, "Kernel-machine model file");
        auto *e = cmd.add_option("--external", external,
                                 "Scoring command speaking the line protocol (split on whitespace)");
        m->excludes(e);
        cmd.add_option("--timeout", timeout, "Seconds to wait for each external response")->capture_default_str();
    }

    std::unique_ptr<Predictor> load(SampleKind kind) const {
        if (!model.empty()) return std::make_unique<KernelMachine>(load_model(fs::path(model)));
        if (external.empty()) throw Error(ErrorCode::invalid_argument, "one of --model or --external is required");
        ExternalPredictorSpec spec;
        std::istringstream words(external);
        for (std::string w; words >> w;) spec.command.push_back(w);
        spec.timeout_seconds = timeout;
        spec.serialization = kind == SampleKind::image ? ExternalPredictorSpec::Serialization::image_csv_row
                                                       : ExternalPredictorSpec::Serialization::sequence_string;
        return std::make_unique<ExternalPredictor>(std::move(spec));
    }
};

LabeledSet load_data(const std::string &path, const std::string &alphabet, std::uint64_t seed) {
    const fs::path p(path);
    if (p.extension() == ".csv") return load_images_csv(p, seed);
    return load_fasta(p, Alphabet(alphabet), seed);
}

Strategy parse_strategy(const std::string &name) {
    if (name == "exact") return Strategy::exact;
    if (name == "epsilon") return Strategy::epsilon_band;
    return Strategy::intervene;
}

std::size_t parse_index(const std::string &text, const std::string &what) {
    std::size_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || v < 1) {
        throw Error(ErrorCode::invalid_argument, "bad " + what + " '" + text + "' (1-based)");
    }
    return v - 1;
}

/// constant | kmer:POS:STRING | pixel:ROW:COL:VALUE, positions 1-based.
ConditionSpec parse_condition(const std::string &text, Strategy strategy, double epsilon) {
    if (text == "constant") return ConditionSpec::constant();
    std::vector<std::string> parts;
    std::istringstream in(text);
    for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
    if (parts.size() == 3 && parts[0] == "kmer") {
        if (strategy == Strategy::epsilon_band) {
            throw Error(ErrorCode::invalid_argument, "epsilon matching does not apply to k-mers");
        }
        return ConditionSpec::kmer(parse_index(parts[1], "position"), parts[2], strategy);
    }
    if (parts.size() == 4 && parts[0] == "pixel") {
        double value = 0.0;
        const auto &v = parts[3];
        const auto res = std::from_chars(v.data(), v.data() + v.size(), value);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
            throw Error(ErrorCode::invalid_argument, "bad pixel value '" + v + "'");
        }
        return ConditionSpec::pixel(parse_index(parts[1], "row"), parse_index(parts[2], "column"), value, strategy,
                                    epsilon);
    }
    throw Error(ErrorCode::invalid_argument, "bad condition '" + text + "'");
}

ExplanationMode model_mode(const SampleSet &z, std::size_t k) {
    return z.kind() == SampleKind::image ? ExplanationMode::identity_image() : ExplanationMode::sparse_pwm(k);
}

std::ofstream open_out(const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
    return out;
}

void close_out(std::ofstream &out, const std::string &path) {
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "failed writing " + path);
}

std::vector<std::size_t> parse_sizes(const std::string &text) {
    std::vector<std::size_t> sizes;
    std::istringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        std::size_t v = 0;
        const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
        if (res.ec != std::errc() || res.ptr != part.data() + part.size() || v == 0) {
            throw Error(ErrorCode::invalid_argument, "bad size '" + part + "' in --sizes");
        }
        sizes.push_back(v);
    }
    return sizes;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    Common common;
    std::size_t length = default_sequence_length;
    double rate = default_mutation_rate;
    std::string alphabet = "ACGT";
    std::size_t rows = 16, cols = 16;
    double noise = 0.1;
};

void gen_sequences_cmd(const GenArgs &a) {
    const auto data = gen_sequences(a.common.n, a.length, default_motifs(a.rate), a.common.seed, Alphabet(a.alphabet));
    save_fasta(data.combined(), fs::path(a.common.out));
}

void gen_glyphs_cmd(const GenArgs &a) {
    const auto data = gen_glyphs(a.common.n, GlyphSpec::standard(a.rows, a.cols, a.noise), a.common.seed);
    save_images_csv(data, fs::path(a.common.out));
}

struct TrainArgs {
    Common common;
    std::string data;
    std::string alphabet = "ACGT";
    std::string kernel;
    double sigma = 1.0;
    std::size_t degree = 8;
    double ridge = default_ridge;
};

void train_cmd(const TrainArgs &a, std::ostream &log) {
    const auto all = load_data(a.data, a.alphabet, a.common.seed);
    const auto training = subsample(all, a.common.n, a.common.seed);
    std::string kind = a.kernel;
    if (kind.empty()) kind = training.samples.kind() == SampleKind::image ? "rbf" : "wd";
    KernelSpec kernel;
    switch (kernel_kind_from_string(kind)) {
        case KernelSpec::Kind::rbf: kernel = KernelSpec::rbf(a.sigma); break;
        case KernelSpec::Kind::linear: kernel = KernelSpec::linear(); break;
        case KernelSpec::Kind::delta: kernel = KernelSpec::delta(); break;
        case KernelSpec::Kind::wd: kernel = KernelSpec::wd(a.degree); break;
    }
    const auto model = train_ls(training, kernel, a.ridge, a.common.threads);
    const KernelMachine machine(model);
    const auto scores = score_all(machine, training.samples.samples(), a.common.threads);
    log << "trained " << describe(kernel) << " on " << training.samples.size()
        << " samples, training accuracy " << fmt(sign_accuracy(scores, training.labels)) << "\n";
    save_model(model, fs::path(a.common.out));
}

struct ExplainArgs {
    Common common;
    PredictorArgs predictor;
    std::string data;
    std::string alphabet = "ACGT";
    std::string mode = "model";
    std::size_t k = 3;
    bool uncentered = false;
    std::string strategy;
    double epsilon = 0.05;
    std::string condition = "constant";
    std::size_t instance = 1;
    bool raw_instance = false;
    double score_sigma = 1.0;
    double feature_sigma = 0.0;
    std::string pgm;
};

void explain_cmd(const ExplainArgs &a) {
    const auto all = load_data(a.data, a.alphabet, a.common.seed);
    const auto z = subsample(all, a.common.n, a.common.seed).samples;
    const auto s = a.predictor.load(z.kind());
    const bool images = z.kind() == SampleKind::image;
    const Strategy strategy =
        a.strategy.empty() ? (a.mode == "instance" ? Strategy::intervene : Strategy::exact) : parse_strategy(a.strategy);

    ImportanceMap map;
    if (a.mode == "model") {
        EstimatorOptions opts;
        opts.centered = !a.uncentered;
        opts.threads = a.common.threads;
        map = mfi_estimate(z, *s, model_mode(z, a.k), parse_condition(a.condition, strategy, a.epsilon), opts);
    } else if (a.mode == "kernel") {
        KernelMfiOptions opts;
        opts.score_kernel = KernelSpec::rbf(a.score_sigma);
        if (a.feature_sigma > 0.0) opts.feature_kernel = KernelSpec::rbf(a.feature_sigma);
        opts.threads = a.common.threads;
        map = kernel_mfi_map(z, *s, model_mode(z, a.k), parse_condition(a.condition, strategy, a.epsilon), opts);
    } else if (a.mode == "instance") {
        if (a.instance < 1 || a.instance > all.samples.size()) {
            throw Error(ErrorCode::out_of_bounds, "--instance " + std::to_string(a.instance) + " outside 1.." +
                                                      std::to_string(all.samples.size()));
        }
        InstanceOptions opts;
        opts.strategy = strategy;
        opts.epsilon = a.epsilon;
        opts.subtract_global_mean = !a.raw_instance;
        opts.threads = a.common.threads;
        const auto window = images ? InstanceWindow::pixel() : InstanceWindow::kmer(a.k);
        map = instance_importance(z, *s, all.samples[a.instance - 1], window, opts);
    } else {
        if (images) throw Error(ErrorCode::shape_mismatch, "poim needs sequence data");
        map = poim(z, *s, a.k, a.common.threads);
    }
    write_importance(map, fs::path(a.common.out));
    if (!a.pgm.empty()) write_pgm(map, fs::path(a.pgm));
}

struct MorfArgs {
    Common common;
    PredictorArgs predictor;
    std::string data;
    std::string alphabet = "ACGT";
    std::string relevance;
    std::string reference;
    std::size_t step = 1;
    std::size_t steps = 10;
    std::string perturbation = "dataset-mean";
    std::size_t radius = 1;
    std::size_t random_curves = 1;
};

void morf_cmd(const MorfArgs &a, std::ostream &log) {
    const auto test = subsample(load_data(a.data, a.alphabet, a.common.seed), a.common.n, a.common.seed);
    const SampleSet reference =
        a.reference.empty() ? test.samples : load_data(a.reference, a.alphabet, a.common.seed).samples;
    const auto s = a.predictor.load(test.samples.kind());
    const auto relevance = read_importance(fs::path(a.relevance));

    MorfOptions opts;
    opts.step = a.step;
    opts.steps = a.steps;
    opts.threads = a.common.threads;
    if (a.perturbation == "local-mean") {
        opts.perturbation = PerturbationStrategy::local_mean(a.radius);
    } else if (a.perturbation == "zero") {
        opts.perturbation = PerturbationStrategy::zero();
    } else if (a.perturbation == "uniform-symbol") {
        opts.perturbation = PerturbationStrategy::uniform_symbol(a.common.seed);
    } else {
        opts.perturbation = PerturbationStrategy::dataset_mean();
    }

    std::vector<MorfCurve> curves{morf_curve(test, *s, relevance, reference, opts)};
    for (std::size_t r = 0; r < a.random_curves; ++r) {
        curves.push_back(morf_curve_random(test, *s, a.common.seed + r, reference, opts));
    }
    if (a.steps >= 1) {
        log << "area over curve: relevance " << fmt(area_over_curve(curves[0]));
        for (std::size_t r = 1; r < curves.size(); ++r) log << ", random " << fmt(area_over_curve(curves[r]));
        log << "\n";
    }
    auto out = open_out(a.common.out);
    write_morf_csv(curves, out);
    close_out(out, a.common.out);
}

struct ConvergeArgs {
    Common common;
    PredictorArgs predictor;
    std::string data;
    std::string alphabet = "ACGT";
    std::string mode = "model";
    std::size_t k = 3;
    std::string sizes = "50,100,200,500,1000,2000";
    bool timing = false;
};

void converge_cmd(const ConvergeArgs &a, std::size_t n_given, std::ostream &log) {
    auto sizes = parse_sizes(a.sizes);
    if (sizes.size() < 2) throw Error(ErrorCode::invalid_argument, "--sizes needs at least two entries");
    const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
    const std::size_t pool = n_given ? n_given : largest;
    const auto all = load_data(a.data, a.alphabet, a.common.seed);
    if (pool > all.samples.size()) {
        throw Error(ErrorCode::too_few_samples, a.data + " has " + std::to_string(all.samples.size()) +
                                                    " samples, " + std::to_string(pool) + " requested");
    }
    const auto z = subsample(all, pool, a.common.seed).samples;
    const auto s = a.predictor.load(z.kind());

    ConvergenceCurve curve;
    if (a.mode == "poim") {
        const unsigned threads = a.common.threads;
        const std::size_t k = a.k;
        curve = convergence_curve(z, sizes, [&](const SampleSet &prefix) { return poim(prefix, *s, k, threads); });
    } else {
        EstimatorOptions opts;
        opts.threads = a.common.threads;
        curve = convergence_curve(z, *s, model_mode(z, a.k), ConditionSpec::constant(), sizes, opts);
    }

    auto out = open_out(a.common.out);
    out << "n,previous_n,distance" << (a.timing ? ",seconds" : "") << "\n";
    for (std::size_t i = 0; i + 1 < curve.sizes.size(); ++i) {
        out << curve.sizes[i + 1] << ',' << curve.sizes[i] << ',' << fmt(curve.distances[i]);
        if (a.timing) out << ',' << fmt(curve.seconds[i + 1]);
        out << "\n";
    }
    close_out(out, a.common.out);
    for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
        log << "n=" << curve.sizes[i] << " " << fmt(curve.seconds[i]) << " s\n";
    }
    log << "final map norm " << fmt(curve.final_norm) << "\n";
}

}  // namespace

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app("Measure of feature importance: explanations for black-box predictors", "mfi");
    app.require_subcommand(1);
    app.set_version_flag("--version", "mfi 1.0");

    // gen
    GenArgs gen;
    auto *gen_cmd = app.add_subcommand("gen", "Generate synthetic data");
    gen_cmd->require_subcommand(1);
    auto *gen_seq = gen_cmd->add_subcommand("sequences", "Motif sequences as FASTA; --n per class");
    add_common(*gen_seq, gen.common);
    gen_seq->add_option("--length", gen.length, "Sequence length")->capture_default_str();
    gen_seq->add_option("--rate", gen.rate, "Per-character motif mutation rate")->capture_default_str();
    gen_seq->add_option("--alphabet", gen.alphabet, "Symbols")->capture_default_str();
    auto *gen_img = gen_cmd->add_subcommand("glyphs", "Three/eight glyph images as CSV; --n per class");
    add_common(*gen_img, gen.common);
    gen_img->add_option("--rows", gen.rows, "Image rows")->capture_default_str();
    gen_img->add_option("--cols", gen.cols, "Image columns")->capture_default_str();
    gen_img->add_option("--noise", gen.noise, "Gaussian noise standard deviation")->capture_default_str();

    // train
    TrainArgs train;
    auto *train_sub = app.add_subcommand("train", "Train a ridge least-squares kernel machine");
    add_common(*train_sub, train.common);
    train_sub->add_option("--data", train.data, "Training data (.csv images or FASTA)")->required();
    train_sub->add_option("--alphabet", train.alphabet, "Sequence symbols")->capture_default_str();
    train_sub->add_option("--kernel", train.kernel, "rbf, linear, delta or wd (default rbf for images, wd for sequences)")
        ->check(CLI::IsMember({"rbf", "linear", "delta", "wd"}));
    train_sub->add_option("--sigma", train.sigma, "RBF width")->capture_default_str();
    train_sub->add_option("--degree", train.degree, "WD kernel degree")->capture_default_str();
    train_sub->add_option("--ridge", train.ridge, "Ridge parameter")->capture_default_str();

    // explain
    ExplainArgs explain;
    auto *explain_sub = app.add_subcommand("explain", "Compute an importance map");
    add_common(*explain_sub, explain.common);
    explain.predictor.add(*explain_sub);
    explain_sub->add_option("--data", explain.data, "Sample set Z (.csv images or FASTA)")->required();
    explain_sub->add_option("--alphabet", explain.alphabet, "Sequence symbols")->capture_default_str();
    explain_sub->add_option("--mode", explain.mode, "model, kernel, instance or poim")
        ->capture_default_str()
        ->check(CLI::IsMember({"model", "kernel", "instance", "poim"}));
    explain_sub->add_option("--k", explain.k, "k-mer length for sequences")->capture_default_str()->check(CLI::PositiveNumber);
    explain_sub->add_flag("--uncentered", explain.uncentered, "Plain conditional mean of s(z) phi(z)");
    explain_sub->add_option("--strategy", explain.strategy,
                            "exact, epsilon or intervene (default intervene for instance, exact otherwise)")
        ->check(CLI::IsMember({"exact", "epsilon", "intervene"}));
    explain_sub->add_option("--epsilon", explain.epsilon, "Band half-width for epsilon matching")->capture_default_str();
    explain_sub->add_option("--condition", explain.condition,
                            "constant, kmer:POS:STRING or pixel:ROW:COL:VALUE (1-based)")
        ->capture_default_str();
    explain_sub->add_option("--instance", explain.instance, "1-based record in --data to explain")->capture_default_str();
    explain_sub->add_flag("--raw", explain.raw_instance, "Instance mode: report E[s|f=t] without subtracting E[s]");
    explain_sub->add_option("--score-sigma", explain.score_sigma, "Kernel mode: RBF width on scores")->capture_default_str();
    explain_sub->add_option("--feature-sigma", explain.feature_sigma,
                            "Kernel mode: RBF width on image features (default 1)");
    explain_sub->add_option("--pgm", explain.pgm, "Also write a PGM heatmap (grid maps only)");

    // morf
    MorfArgs morf;
    auto *morf_sub = app.add_subcommand("morf", "Most-relevant-first curves against random orderings");
    add_common(*morf_sub, morf.common);
    morf.predictor.add(*morf_sub);
    morf_sub->add_option("--data", morf.data, "Labeled test data")->required();
    morf_sub->add_option("--alphabet", morf.alphabet, "Sequence symbols")->capture_default_str();
    morf_sub->add_option("--relevance", morf.relevance, "Importance map from explain")->required();
    morf_sub->add_option("--reference", morf.reference, "Reference set for perturbation statistics (default: test data)");
    morf_sub->add_option("--step", morf.step, "Coordinates perturbed per step")->capture_default_str()->check(CLI::PositiveNumber);
    morf_sub->add_option("--steps", morf.steps, "Number of steps")->capture_default_str();
    morf_sub->add_option("--perturbation", morf.perturbation, "dataset-mean, local-mean, zero or uniform-symbol")
        ->capture_default_str()
        ->check(CLI::IsMember({"dataset-mean", "local-mean", "zero", "uniform-symbol"}));
    morf_sub->add_option("--radius", morf.radius, "local-mean radius")->capture_default_str();
    morf_sub->add_option("--random", morf.random_curves, "Random orderings (seeds seed, seed+1, ...)")
        ->capture_default_str();

    // converge
    ConvergeArgs converge;
    std::size_t converge_n = 0;
    auto *converge_sub = app.add_subcommand("converge", "Frobenius distance between maps at increasing sample sizes");
    add_common(*converge_sub, converge.common);
    converge_sub->get_option("--n")->description("Pool size drawn from --data (default: largest of --sizes)");
    converge.predictor.add(*converge_sub);
    converge_sub->add_option("--data", converge.data, "Sample set")->required();
    converge_sub->add_option("--alphabet", converge.alphabet, "Sequence symbols")->capture_default_str();
    converge_sub->add_option("--mode", converge.mode, "model or poim")
        ->capture_default_str()
        ->check(CLI::IsMember({"model", "poim"}));
    converge_sub->add_option("--k", converge.k, "k-mer length for sequences")->capture_default_str();
    converge_sub->add_option("--sizes", converge.sizes, "Increasing sample sizes")->capture_default_str();
    converge_sub->add_flag("--timing", converge.timing, "Add a wall-time column (output is then not reproducible)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        const int status = app.exit(e, out, err);
        return status == 0 ? 0 : exit_usage;
    }

    try {
        if (gen_seq->parsed()) {
            gen_sequences_cmd(gen);
        } else if (gen_img->parsed()) {
            gen_glyphs_cmd(gen);
        } else if (train_sub->parsed()) {
            train_cmd(train, err);
        } else if (explain_sub->parsed()) {
            explain_cmd(explain);
        } else if (morf_sub->parsed()) {
            morf_cmd(morf, err);
        } else if (converge_sub->parsed()) {
            if (converge_sub->count("--n") > 0) converge_n = converge.common.n;
            converge_cmd(converge, converge_n, err);
        }
    } catch (const Error &e) {
        err << "mfi: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception &e) {
        err << "mfi: " << e.what() << "\n";
        return exit_unexpected;
    }
    return 0;
}

}  // namespace mfi::cli
