#pragma once

// Kernel-machine predictors: scoring, a ridge least-squares reference trainer
// and the model text format.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfi/core.hpp"
#include "mfi/kernels.hpp"

namespace mfi {

/// s(x) = sum_i alphas[i] k(support[i], x) + bias
struct KernelMachineModel {
    SampleSet support;
    std::vector<double> alphas;
    double bias = 0.0;
    KernelSpec kernel;
};

double km_score(const KernelMachineModel &model, const Sample &x);

class KernelMachine final : public Predictor {
public:
    explicit KernelMachine(KernelMachineModel model);

    double score(const Sample &x) const override { return km_score(model_, x); }
    const KernelMachineModel &model() const noexcept { return model_; }

private:
    KernelMachineModel model_;
};

inline constexpr double default_ridge = 1e-3;

/// Solves (G + ridge I) alpha = labels on the training Gram matrix; bias is 0.
KernelMachineModel train_ls(const SampleSet &training, std::span<const double> labels,
                            const KernelSpec &kernel, double ridge = default_ridge,
                            unsigned threads = 1);
KernelMachineModel train_ls(const LabeledSet &training, const KernelSpec &kernel,
                            double ridge = default_ridge, unsigned threads = 1);

inline constexpr int model_format_version = 1;

void save_model(const KernelMachineModel &model, std::ostream &out);
void save_model(const KernelMachineModel &model, const std::filesystem::path &path);
/// Throws malformed_file, version_mismatch or io_error.
KernelMachineModel load_model(std::istream &in);
KernelMachineModel load_model(const std::filesystem::path &path);

}  // namespace mfi
