#include "mfi/kernels.hpp"

#include <cmath>
#include <sstream>

namespace mfi {

KernelSpec KernelSpec::rbf(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::invalid_argument, "rbf bandwidth must be positive");
    }
    return {Kind::rbf, sigma, 1};
}

KernelSpec KernelSpec::wd(std::size_t degree) {
    if (degree == 0) throw Error(ErrorCode::invalid_argument, "wd degree must be at least 1");
    return {Kind::wd, 1.0, degree};
}

std::string_view to_string(KernelSpec::Kind kind) {
    switch (kind) {
    case KernelSpec::Kind::rbf: return "rbf";
    case KernelSpec::Kind::linear: return "linear";
    case KernelSpec::Kind::delta: return "delta";
    case KernelSpec::Kind::wd: return "wd";
    }
    return "unknown";
}

KernelSpec::Kind kernel_kind_from_string(std::string_view name) {
    if (name == "rbf") return KernelSpec::Kind::rbf;
    if (name == "linear") return KernelSpec::Kind::linear;
    if (name == "delta") return KernelSpec::Kind::delta;
    if (name == "wd") return KernelSpec::Kind::wd;
    throw Error(ErrorCode::invalid_argument, "unknown kernel '" + std::string(name) + "'");
}

std::string describe(const KernelSpec &kernel) {
    std::ostringstream os;
    os << to_string(kernel.kind);
    if (kernel.kind == KernelSpec::Kind::rbf) os << "(sigma=" << kernel.sigma << ")";
    if (kernel.kind == KernelSpec::Kind::wd) os << "(D=" << kernel.degree << ")";
    return os.str();
}

double rbf_eval(std::span<const double> x, std::span<const double> y, double sigma) {
    if (x.size() != y.size()) throw Error(ErrorCode::dimension_mismatch, "rbf on vectors of different length");
    if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "rbf bandwidth must be positive");
    double r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        r += d * d;
    }
    return std::exp(-r / (2.0 * sigma * sigma));
}

double linear_eval(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::dimension_mismatch, "dot product of vectors of different length");
    double r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r += x[i] * y[i];
    return r;
}

double wd_weight(std::size_t d, std::size_t degree) {
    const auto D = static_cast<double>(degree);
    return 2.0 * (D - static_cast<double>(d) + 1.0) / (D * (D + 1.0));
}

double wd_eval(std::string_view x, std::string_view y, std::size_t degree) {
    if (x.size() != y.size()) throw Error(ErrorCode::dimension_mismatch, "wd kernel on sequences of different length");
    if (degree == 0 || degree > x.size()) {
        throw Error(ErrorCode::invalid_argument, "wd degree " + std::to_string(degree) +
                                                     " outside 1.." + std::to_string(x.size()));
    }
    // A length-d substring ending at i matches iff the current run of matching
    // characters is at least d long, so position i contributes the weight
    // prefix sum up to min(run, D), which is r (2D - r + 1) / (D (D + 1)).
    const auto D = static_cast<double>(degree);
    const double norm = D * (D + 1.0);
    auto cumulative = [&](std::size_t run) {
        const auto r = static_cast<double>(run < degree ? run : degree);
        return r * (2.0 * D - r + 1.0) / norm;
    };

    double total = 0.0;
    std::size_t run = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        run = (x[i] == y[i]) ? run + 1 : 0;
        total += cumulative(run);
    }
    return total;
}

double evaluate(const KernelSpec &kernel, const Sample &x, const Sample &y) {
    if (x.index() != y.index()) throw Error(ErrorCode::shape_mismatch, "kernel between a sequence and an image");
    if (kernel.kind == KernelSpec::Kind::delta) return x == y ? 1.0 : 0.0;
    if (const auto *sx = std::get_if<Sequence>(&x)) {
        if (kernel.kind != KernelSpec::Kind::wd) {
            throw Error(ErrorCode::incompatible_kernel, describe(kernel) + " kernel on sequences");
        }
        return wd_eval(*sx, std::get<Sequence>(y), kernel.degree);
    }
    const auto &ix = std::get<Image>(x);
    const auto &iy = std::get<Image>(y);
    if (ix.rows() != iy.rows() || ix.cols() != iy.cols()) {
        throw Error(ErrorCode::shape_mismatch, "kernel between images of different shape");
    }
    switch (kernel.kind) {
    case KernelSpec::Kind::rbf: return rbf_eval(ix.pixels(), iy.pixels(), kernel.sigma);
    case KernelSpec::Kind::linear: return linear_eval(ix.pixels(), iy.pixels());
    default: throw Error(ErrorCode::incompatible_kernel, describe(kernel) + " kernel on images");
    }
}

double evaluate(const KernelSpec &kernel, double x, double y) {
    switch (kernel.kind) {
    case KernelSpec::Kind::rbf: {
        const double d = x - y;
        return std::exp(-d * d / (2.0 * kernel.sigma * kernel.sigma));
    }
    case KernelSpec::Kind::linear: return x * y;
    case KernelSpec::Kind::delta: return x == y ? 1.0 : 0.0;
    case KernelSpec::Kind::wd: break;
    }
    throw Error(ErrorCode::incompatible_kernel, "wd kernel on real values");
}

GramMatrix gram(std::span<const Sample> samples, const KernelSpec &kernel, unsigned threads) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    GramMatrix g{Eigen::MatrixXd(n, n), kernel, false};
    // row i owns entries (i, j) and (j, i) for j >= i
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index c = r; c < n; ++c) {
            const double v = evaluate(kernel, samples[i], samples[static_cast<std::size_t>(c)]);
            g.entries(r, c) = v;
            g.entries(c, r) = v;
        }
    });
    return g;
}

GramMatrix gram(std::span<const double> values, const KernelSpec &kernel) {
    const auto n = static_cast<Eigen::Index>(values.size());
    GramMatrix g{Eigen::MatrixXd(n, n), kernel, false};
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = r; c < n; ++c) {
            const double v = evaluate(kernel, values[r], values[c]);
            g.entries(r, c) = v;
            g.entries(c, r) = v;
        }
    }
    return g;
}

GramMatrix gram(const Eigen::MatrixXd &features, const KernelSpec &kernel) {
    const Eigen::Index n = features.rows();
    GramMatrix g{Eigen::MatrixXd(n, n), kernel, false};
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = r; c < n; ++c) {
            double v = 0.0;
            switch (kernel.kind) {
            case KernelSpec::Kind::rbf:
                v = std::exp(-(features.row(r) - features.row(c)).squaredNorm() /
                             (2.0 * kernel.sigma * kernel.sigma));
                break;
            case KernelSpec::Kind::linear: v = features.row(r).dot(features.row(c)); break;
            case KernelSpec::Kind::delta: v = features.row(r) == features.row(c) ? 1.0 : 0.0; break;
            case KernelSpec::Kind::wd:
                throw Error(ErrorCode::incompatible_kernel, "wd kernel on real feature vectors");
            }
            g.entries(r, c) = v;
            g.entries(c, r) = v;
        }
    }
    return g;
}

Eigen::MatrixXd center(const Eigen::MatrixXd &g) {
    if (g.rows() != g.cols()) throw Error(ErrorCode::dimension_mismatch, "centering a non-square matrix");
    const Eigen::VectorXd row_mean = g.rowwise().mean();
    const Eigen::RowVectorXd col_mean = g.colwise().mean();
    const double grand = g.mean();
    Eigen::MatrixXd out = g;
    out.colwise() -= row_mean;
    out.rowwise() -= col_mean;
    out.array() += grand;
    return out;
}

GramMatrix center_gram(const GramMatrix &g) { return {center(g.entries), g.kernel, true}; }

double hsic_centered(const Eigen::MatrixXd &k_centered, const Eigen::MatrixXd &l) {
    if (k_centered.rows() != l.rows() || k_centered.cols() != l.cols() || l.rows() != l.cols()) {
        throw Error(ErrorCode::dimension_mismatch, "hsic on Gram matrices of different size");
    }
    const auto n = static_cast<double>(l.rows());
    if (n < 2) throw Error(ErrorCode::too_few_samples, "hsic needs at least 2 samples");
    // tr(HKH L) with symmetric matrices is the elementwise inner product
    return k_centered.cwiseProduct(l).sum() / ((n - 1.0) * (n - 1.0));
}

double hsic(const Eigen::MatrixXd &k, const Eigen::MatrixXd &l) {
    if (k.rows() != l.rows() || k.cols() != l.cols()) {
        throw Error(ErrorCode::dimension_mismatch, "hsic on Gram matrices of different size");
    }
    return hsic_centered(center(k), l);
}

double hsic(const GramMatrix &k, const GramMatrix &l) {
    return hsic_centered(k.centered ? k.entries : center(k.entries), l.entries);
}

}  // namespace mfi
