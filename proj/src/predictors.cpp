#include "mfi/predictors.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "text.hpp"

namespace mfi {

double km_score(const KernelMachineModel &model, const Sample &x) {
    if (shape_of(x) != model.support.shape()) {
        throw Error(ErrorCode::shape_mismatch, "model expects " + describe(model.support.shape()) +
                                                   ", got " + describe(shape_of(x)));
    }
    double s = model.bias;
    for (std::size_t i = 0; i < model.alphas.size(); ++i) {
        if (model.alphas[i] != 0.0) s += model.alphas[i] * evaluate(model.kernel, model.support[i], x);
    }
    return s;
}

KernelMachine::KernelMachine(KernelMachineModel model) : model_(std::move(model)) {
    if (model_.alphas.size() != model_.support.size()) {
        throw Error(ErrorCode::dimension_mismatch, "one coefficient per support sample required");
    }
    for (double a : model_.alphas) {
        if (!std::isfinite(a)) throw Error(ErrorCode::invalid_argument, "non-finite model coefficient");
    }
    if (!std::isfinite(model_.bias)) throw Error(ErrorCode::invalid_argument, "non-finite model bias");
}

KernelMachineModel train_ls(const SampleSet &training, std::span<const double> labels,
                            const KernelSpec &kernel, double ridge, unsigned threads) {
    if (labels.size() != training.size()) {
        throw Error(ErrorCode::label_count_mismatch, std::to_string(labels.size()) + " labels for " +
                                                         std::to_string(training.size()) + " samples");
    }
    if (!(ridge > 0.0)) throw Error(ErrorCode::invalid_argument, "ridge must be positive");

    GramMatrix g = gram(training.samples(), kernel, threads);
    const auto n = static_cast<Eigen::Index>(training.size());
    g.entries.diagonal().array() += ridge;
    const Eigen::Map<const Eigen::VectorXd> y(labels.data(), n);

    Eigen::LDLT<Eigen::MatrixXd> solver(g.entries);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::singular_system, "factorization failed");
    Eigen::VectorXd alpha = solver.solve(y);
    // one step of iterative refinement keeps the residual near machine precision
    alpha += solver.solve(y - g.entries * alpha);
    if (!alpha.allFinite()) throw Error(ErrorCode::singular_system, "solve produced non-finite coefficients");

    return {training, std::vector<double>(alpha.data(), alpha.data() + n), 0.0, kernel};
}

KernelMachineModel train_ls(const LabeledSet &training, const KernelSpec &kernel, double ridge,
                            unsigned threads) {
    std::vector<double> y(training.labels.begin(), training.labels.end());
    return train_ls(training.samples, y, kernel, ridge, threads);
}

// ---------------------------------------------------------------------------
// Model file
//
//   version: 1
//   kernel: rbf
//   params: sigma=2 degree=1
//   shape: image 16 16          | shape: sequence 45
//   alphabet: ACGT              (sequences only)
//   bias: 0
//   alphas: 0.5 -0.25 ...
//   support: <count>
//   <one sample per line: raw sequence, or comma-separated row-major pixels>

void save_model(const KernelMachineModel &model, std::ostream &out) {
    const Shape &shape = model.support.shape();
    out << "version: " << model_format_version << '\n';
    out << "kernel: " << to_string(model.kernel.kind) << '\n';
    out << "params: sigma=" << text::format_double(model.kernel.sigma)
        << " degree=" << model.kernel.degree << '\n';
    if (shape.kind == SampleKind::sequence) {
        out << "shape: sequence " << shape.cols << '\n';
        out << "alphabet: " << model.support.alphabet().symbols() << '\n';
    } else {
        out << "shape: image " << shape.rows << ' ' << shape.cols << '\n';
    }
    out << "bias: " << text::format_double(model.bias) << '\n';
    out << "alphas:";
    for (double a : model.alphas) out << ' ' << text::format_double(a);
    out << '\n';
    out << "support: " << model.support.size() << '\n';
    for (const auto &s : model.support) {
        if (const auto *seq = std::get_if<Sequence>(&s)) {
            out << *seq << '\n';
            continue;
        }
        const auto px = std::get<Image>(s).pixels();
        for (std::size_t i = 0; i < px.size(); ++i) {
            if (i) out << ',';
            out << text::format_double(px[i]);
        }
        out << '\n';
    }
}

void save_model(const KernelMachineModel &model, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write model file " + path.string());
    save_model(model, out);
    if (!out) throw Error(ErrorCode::io_error, "failed writing model file " + path.string());
}

namespace {

[[noreturn]] void malformed(const std::string &what) { throw Error(ErrorCode::malformed_file, what); }

double require_double(std::string_view s, const std::string &field) {
    auto v = text::parse_double(s);
    if (!v || !std::isfinite(*v)) malformed("field '" + field + "' is not a finite number");
    return *v;
}

}  // namespace

KernelMachineModel load_model(std::istream &in) {
    std::map<std::string, std::string, std::less<>> fields;
    std::string line;
    std::size_t line_no = 0;
    bool at_support = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto colon = body.find(':');
        if (colon == std::string_view::npos) malformed("line " + std::to_string(line_no) + ": expected 'key: value'");
        std::string key(text::trim(body.substr(0, colon)));
        std::string value(text::trim(body.substr(colon + 1)));
        if (key == "version") {
            const auto v = text::parse_int<int>(value);
            if (!v) malformed("unreadable version tag '" + value + "'");
            if (*v != model_format_version) {
                throw Error(ErrorCode::version_mismatch, "model format version " + value +
                                                             " (supported: " +
                                                             std::to_string(model_format_version) + ")");
            }
        }
        if (!fields.emplace(key, value).second) malformed("duplicate field '" + key + "'");
        if (key == "support") {
            at_support = true;
            break;
        }
    }
    for (const char *required : {"version", "kernel", "params", "shape", "bias", "alphas"}) {
        if (!fields.contains(required)) malformed(std::string("missing field '") + required + "'");
    }
    if (!at_support) malformed("missing field 'support'");

    // kernel
    KernelSpec kernel;
    try {
        kernel.kind = kernel_kind_from_string(fields["kernel"]);
    } catch (const Error &e) {
        malformed(e.what());
    }
    {
        std::istringstream ps(fields["params"]);
        std::string token;
        while (ps >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) malformed("params entry '" + token + "' lacks '='");
            const auto name = token.substr(0, eq);
            const auto value = std::string_view(token).substr(eq + 1);
            if (name == "sigma") {
                kernel.sigma = require_double(value, "sigma");
                if (!(kernel.sigma > 0.0)) malformed("sigma must be positive");
            } else if (name == "degree") {
                const auto d = text::parse_int<std::size_t>(value);
                if (!d || *d == 0) malformed("degree must be a positive integer");
                kernel.degree = *d;
            } else {
                malformed("unknown parameter '" + name + "'");
            }
        }
    }

    // shape
    Shape shape;
    Alphabet alphabet;
    {
        std::istringstream ss(fields["shape"]);
        std::string kind;
        ss >> kind;
        std::size_t a = 0, b = 0;
        if (kind == "sequence" && (ss >> a) && a > 0) {
            shape = Shape::sequence(a);
            if (auto it = fields.find("alphabet"); it != fields.end()) {
                try {
                    alphabet = Alphabet(it->second);
                } catch (const Error &e) {
                    malformed(e.what());
                }
            }
        } else if (kind == "image" && (ss >> a >> b) && a > 0 && b > 0) {
            shape = Shape::image(a, b);
        } else {
            malformed("unreadable shape '" + fields["shape"] + "'");
        }
    }

    const double bias = require_double(fields["bias"], "bias");
    std::vector<double> alphas;
    {
        std::istringstream as(fields["alphas"]);
        std::string token;
        while (as >> token) alphas.push_back(require_double(token, "alphas"));
    }
    if (alphas.empty()) malformed("field 'alphas' is empty");

    const auto count = text::parse_int<std::size_t>(fields["support"]);
    if (!count || *count == 0) malformed("unreadable support count '" + fields["support"] + "'");
    if (*count != alphas.size()) {
        malformed(std::to_string(alphas.size()) + " alphas for " + std::to_string(*count) + " support samples");
    }

    std::vector<Sample> support;
    support.reserve(*count);
    while (support.size() < *count && std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (shape.kind == SampleKind::sequence) {
            support.emplace_back(std::string(body));
            continue;
        }
        const auto cells = text::split(body, ',');
        if (cells.size() != shape.size()) {
            malformed("line " + std::to_string(line_no) + ": expected " + std::to_string(shape.size()) +
                      " pixels, got " + std::to_string(cells.size()));
        }
        std::vector<double> px;
        px.reserve(cells.size());
        for (auto c : cells) px.push_back(require_double(c, "support"));
        support.emplace_back(Image(shape.rows, shape.cols, std::move(px)));
    }
    if (support.size() != *count) malformed("support section truncated");

    try {
        return {SampleSet(shape, std::move(support), 0, alphabet), std::move(alphas), bias, kernel};
    } catch (const Error &e) {
        malformed(e.what());
    }
}

KernelMachineModel load_model(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open model file " + path.string());
    return load_model(in);
}

}  // namespace mfi
