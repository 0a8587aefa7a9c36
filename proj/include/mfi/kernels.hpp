#pragma once

// Kernel functions, Gram matrices, centering and the empirical HSIC.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfi/core.hpp"

namespace mfi {

struct KernelSpec {
    enum class Kind { rbf, linear, delta, wd };
    Kind kind = Kind::rbf;
    double sigma = 1.0;      // rbf bandwidth
    std::size_t degree = 1;  // longest substring counted by wd

    static KernelSpec rbf(double sigma);
    static KernelSpec linear() { return {Kind::linear, 1.0, 1}; }
    static KernelSpec delta() { return {Kind::delta, 1.0, 1}; }
    static KernelSpec wd(std::size_t degree);

    bool operator==(const KernelSpec &) const = default;
};

std::string describe(const KernelSpec &kernel);
std::string_view to_string(KernelSpec::Kind kind);
KernelSpec::Kind kernel_kind_from_string(std::string_view name);

/// exp(-||x - y||^2 / (2 sigma^2))
double rbf_eval(std::span<const double> x, std::span<const double> y, double sigma);
double linear_eval(std::span<const double> x, std::span<const double> y);

/// Weight of matching substrings of length d (1-based) in a degree-D wd kernel:
/// 2 (D - d + 1) / (D (D + 1)).
double wd_weight(std::size_t d, std::size_t degree);

/// Weighted-degree string kernel: sum over d <= D of wd_weight(d) times the
/// number of positions i where x[i, i+d) == y[i, i+d).
double wd_eval(std::string_view x, std::string_view y, std::size_t degree);

template <class T>
double delta_eval(const T &a, const T &b) {
    return a == b ? 1.0 : 0.0;
}

/// Kernel between two samples. Throws incompatible_kernel (e.g. wd on images)
/// and shape_mismatch.
double evaluate(const KernelSpec &kernel, const Sample &x, const Sample &y);
/// Kernel between two scalars (scores or single features).
double evaluate(const KernelSpec &kernel, double x, double y);

struct GramMatrix {
    Eigen::MatrixXd entries;
    KernelSpec kernel;
    bool centered = false;

    Eigen::Index size() const noexcept { return entries.rows(); }
};

GramMatrix gram(std::span<const Sample> samples, const KernelSpec &kernel, unsigned threads = 1);
GramMatrix gram(std::span<const double> values, const KernelSpec &kernel);
/// Rows of `features` are the per-sample feature vectors.
GramMatrix gram(const Eigen::MatrixXd &features, const KernelSpec &kernel);

/// H G H with H = I - (1/n) 1 1^T.
GramMatrix center_gram(const GramMatrix &g);
Eigen::MatrixXd center(const Eigen::MatrixXd &g);

/// Biased empirical HSIC: tr(K H L H) / (n - 1)^2. Throws dimension_mismatch.
double hsic(const GramMatrix &k, const GramMatrix &l);
double hsic(const Eigen::MatrixXd &k, const Eigen::MatrixXd &l);
/// Same estimator with a pre-centered K: sum_ij Kc_ij L_ij / (n - 1)^2.
double hsic_centered(const Eigen::MatrixXd &k_centered, const Eigen::MatrixXd &l);

}  // namespace mfi
