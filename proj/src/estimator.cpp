#include "mfi/estimator.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace mfi {

namespace {

/// Flat po-matrix indices (kmer_rank * positions + position) set by phi = sparse-pwm(k).
std::vector<std::size_t> active_kmers(const Sequence &seq, const Alphabet &alphabet, std::size_t k) {
    const std::size_t positions = seq.size() - k + 1;
    const std::size_t top = alphabet.kmer_count(k - 1);  // weight of the leading symbol
    std::vector<std::size_t> out(positions);
    std::size_t rank = alphabet.kmer_index(std::string_view(seq).substr(0, k));
    for (std::size_t j = 0; j < positions; ++j) {
        if (j > 0) {
            const auto leaving = static_cast<std::size_t>(alphabet.index(seq[j - 1]));
            const auto entering = static_cast<std::size_t>(alphabet.index(seq[j + k - 1]));
            rank = (rank - leaving * top) * alphabet.size() + entering;
        }
        out[j] = rank * positions + j;
    }
    return out;
}

MapMetadata metadata(const SampleSet &z, std::string mode, std::string condition) {
    return {std::move(mode), std::move(condition), z.seed(), z.size()};
}

void check_kernel_on_reals(const KernelSpec &kernel, const char *role) {
    if (kernel.kind == KernelSpec::Kind::wd) {
        throw Error(ErrorCode::incompatible_kernel, std::string("wd kernel cannot act on ") + role);
    }
}

double mean(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

std::vector<double> score_all(const Predictor &s, std::span<const Sample> xs, unsigned threads) {
    if (threads <= 1 || xs.size() < 2) return s.score_batch(xs);
    std::vector<double> out(xs.size());
    parallel_for(xs.size(), threads, [&](std::size_t i) { out[i] = s.score(xs[i]); });
    return out;
}

// ---------------------------------------------------------------------------

Sample ConditionedSet::member(const SampleSet &z, std::size_t r) const {
    const Sample &x = z[indices[r]];
    if (spec.strategy == Strategy::intervene && !std::holds_alternative<ConstantSelector>(spec.selector)) {
        return intervene(x, spec.selector, spec.target);
    }
    return x;
}

std::vector<Sample> ConditionedSet::members(const SampleSet &z) const {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) out.push_back(member(z, r));
    return out;
}

ConditionedSet condition(const SampleSet &z, const ConditionSpec &spec) {
    validate_condition(spec, z.shape(), z.alphabet());
    ConditionedSet out;
    out.spec = spec;
    const bool take_all = std::holds_alternative<ConstantSelector>(spec.selector) ||
                          spec.strategy == Strategy::intervene;
    if (take_all) {
        out.indices.resize(z.size());
        std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
    } else if (const auto *p = std::get_if<PixelSelector>(&spec.selector)) {
        const double t = std::get<double>(spec.target);
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double v = std::get<Image>(z[i])(p->row, p->col);
            const bool hit = spec.strategy == Strategy::exact ? v == t : std::abs(v - t) <= spec.epsilon;
            if (hit) out.indices.push_back(i);
        }
    } else {
        const auto &km = std::get<KmerSelector>(spec.selector);
        const auto &t = std::get<std::string>(spec.target);
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (std::string_view(std::get<Sequence>(z[i])).substr(km.start, km.k) == t) out.indices.push_back(i);
        }
    }
    if (out.indices.empty()) {
        throw Error(ErrorCode::empty_conditioned_set, "no sample satisfies " + describe(spec));
    }
    out.weights.assign(out.indices.size(), 1.0 / static_cast<double>(out.indices.size()));
    return out;
}

// ---------------------------------------------------------------------------

ImportanceMap mfi_estimate(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                           const ConditionSpec &spec, const EstimatorOptions &options) {
    const Layout layout = layout_for(mode, z.shape(), z.alphabet());
    const ConditionedSet cs = condition(z, spec);
    const std::vector<Sample> xs = cs.members(z);
    const std::vector<double> scores = score_all(s, xs, options.threads);

    ImportanceMap map(layout,
                      metadata(z, describe(mode) + (options.centered ? "" : " uncentered"), describe(spec)),
                      z.alphabet());
    const auto m = static_cast<double>(cs.m());
    const double mu_s = mean(scores);
    // centered form: mean of (s - mu_s)(phi - mu_phi), equal to E[s phi] - mu_s mu_phi
    std::vector<double> dev(scores.size());
    double dev_sum = 0.0;
    for (std::size_t r = 0; r < scores.size(); ++r) {
        dev[r] = scores[r] - mu_s;
        dev_sum += dev[r];
    }

    switch (mode.variant) {
    case ExplanationMode::Variant::unit:
        map.values[0] = options.centered ? 0.0 : mu_s;
        break;

    case ExplanationMode::Variant::identity_image: {
        const std::size_t d = layout.size();
        parallel_for(d, options.threads, [&](std::size_t p) {
            double mu_phi = 0.0;
            for (const auto &x : xs) mu_phi += std::get<Image>(x)[p];
            mu_phi /= m;
            double acc = 0.0;
            for (std::size_t r = 0; r < xs.size(); ++r) {
                const double phi = std::get<Image>(xs[r])[p];
                acc += options.centered ? dev[r] * (phi - mu_phi) : scores[r] * phi;
            }
            map.values[p] = acc / m;
        });
        break;
    }

    case ExplanationMode::Variant::sparse_pwm: {
        std::vector<double> acc(layout.size(), 0.0);
        std::vector<std::size_t> count(layout.size(), 0);
        for (std::size_t r = 0; r < xs.size(); ++r) {
            for (auto p : active_kmers(std::get<Sequence>(xs[r]), z.alphabet(), mode.k)) {
                acc[p] += options.centered ? dev[r] : scores[r];
                ++count[p];
            }
        }
        for (std::size_t p = 0; p < layout.size(); ++p) {
            if (options.centered) {
                const double mu_phi = static_cast<double>(count[p]) / m;
                map.values[p] = acc[p] / m - mu_phi * dev_sum / m;
            } else {
                map.values[p] = acc[p] / m;
            }
        }
        break;
    }
    }
    return map;
}

ImportanceMap model_importance(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                               const EstimatorOptions &options) {
    if (mode.variant == ExplanationMode::Variant::unit) {
        throw Error(ErrorCode::invalid_argument, "model-based explanation needs identity-image or sparse-pwm");
    }
    return mfi_estimate(z, s, mode, ConditionSpec::constant(), options);
}

// ---------------------------------------------------------------------------

ImportanceMap instance_importance(const SampleSet &z, const Predictor &s, const Sample &g,
                                  const InstanceWindow &window, const InstanceOptions &options) {
    validate_sample(g, z.shape(), z.alphabet());
    Layout layout;
    if (window.kind == InstanceWindow::Kind::pixel) {
        if (z.kind() != SampleKind::image) throw Error(ErrorCode::shape_mismatch, "pixel window on sequences");
        layout = Layout::grid(z.shape().rows, z.shape().cols);
    } else {
        if (z.kind() != SampleKind::sequence) throw Error(ErrorCode::shape_mismatch, "k-mer window on images");
        layout = Layout::positional(z.shape().cols, window.k);
    }
    if (options.strategy == Strategy::epsilon_band) {
        if (window.kind == InstanceWindow::Kind::kmer) {
            throw Error(ErrorCode::invalid_argument, "epsilon-band matching needs a real-valued feature");
        }
        if (!(options.epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
    }

    const std::vector<double> base = score_all(s, z.samples(), options.threads);
    const double global = options.subtract_global_mean ? mean(base) : 0.0;

    auto selector_at = [&](std::size_t flat) -> Selector {
        if (window.kind == InstanceWindow::Kind::pixel) return PixelSelector{flat / layout.cols, flat % layout.cols};
        return KmerSelector{flat, window.k};
    };

    std::string condition_label = std::string(to_string(options.strategy));
    if (window.kind == InstanceWindow::Kind::kmer) condition_label += " k=" + std::to_string(window.k);
    ImportanceMap map(layout, metadata(z, "instance(unit)", condition_label), z.alphabet());

    // intervention scores run sequentially inside each coordinate
    parallel_for(layout.size(), options.threads, [&](std::size_t flat) {
        const Selector sel = selector_at(flat);
        const FeatureValue t = feature_value(sel, g);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t r = 0; r < z.size(); ++r) {
            if (options.strategy == Strategy::intervene) {
                sum += s.score(intervene(z[r], sel, t));
                ++count;
                continue;
            }
            const FeatureValue v = feature_value(sel, z[r]);
            bool hit = v == t;
            if (options.strategy == Strategy::epsilon_band) {
                hit = std::abs(std::get<double>(v) - std::get<double>(t)) <= options.epsilon;
            }
            if (hit) {
                sum += base[r];
                ++count;
            }
        }
        if (count > 0) map.values[flat] = sum / static_cast<double>(count) - global;
    });
    return map;
}

// ---------------------------------------------------------------------------

KernelSpec default_feature_kernel(const ExplanationMode &mode) {
    if (mode.variant == ExplanationMode::Variant::identity_image) return KernelSpec::rbf(1.0);
    return KernelSpec::delta();
}

namespace {

struct KernelSetup {
    ConditionedSet cs;
    std::vector<Sample> xs;
    Eigen::MatrixXd k_centered;
    KernelSpec feature_kernel;
};

KernelSetup prepare_kernel_mfi(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                               const ConditionSpec &spec, const KernelMfiOptions &options) {
    layout_for(mode, z.shape(), z.alphabet());
    KernelSetup setup{condition(z, spec), {}, {}, options.feature_kernel.value_or(default_feature_kernel(mode))};
    check_kernel_on_reals(options.score_kernel, "scores");
    check_kernel_on_reals(setup.feature_kernel, "explanation-mode features");
    if (setup.cs.m() < 2) {
        throw Error(ErrorCode::too_few_samples, "kernel MFI needs at least 2 conditioned samples, got " +
                                                    std::to_string(setup.cs.m()));
    }
    setup.xs = setup.cs.members(z);
    const std::vector<double> scores = score_all(s, setup.xs, options.threads);
    setup.k_centered = center(gram(scores, options.score_kernel).entries);
    return setup;
}

}  // namespace

double kernel_mfi(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                  const ConditionSpec &spec, const KernelMfiOptions &options) {
    const KernelSetup setup = prepare_kernel_mfi(z, s, mode, spec, options);
    const auto m = static_cast<Eigen::Index>(setup.cs.m());
    const KernelSpec &l = setup.feature_kernel;

    Eigen::MatrixXd lg(m, m);
    switch (mode.variant) {
    case ExplanationMode::Variant::unit:
        lg.setConstant(evaluate(l, 1.0, 1.0));
        break;
    case ExplanationMode::Variant::identity_image: {
        const std::size_t d = z.shape().size();
        Eigen::MatrixXd features(m, static_cast<Eigen::Index>(d));
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto px = std::get<Image>(setup.xs[static_cast<std::size_t>(r)]).pixels();
            for (std::size_t p = 0; p < d; ++p) features(r, static_cast<Eigen::Index>(p)) = px[p];
        }
        lg = gram(features, l).entries;
        break;
    }
    case ExplanationMode::Variant::sparse_pwm: {
        // phi outputs are 0/1 vectors with one active k-mer per position, so
        // they are determined by how many positions carry the same k-mer
        std::vector<std::vector<std::size_t>> active(setup.xs.size());
        for (std::size_t r = 0; r < setup.xs.size(); ++r) {
            active[r] = active_kmers(std::get<Sequence>(setup.xs[r]), z.alphabet(), mode.k);
        }
        const double positions = static_cast<double>(active.front().size());
        for (Eigen::Index r = 0; r < m; ++r) {
            for (Eigen::Index q = r; q < m; ++q) {
                const auto &a = active[static_cast<std::size_t>(r)];
                const auto &b = active[static_cast<std::size_t>(q)];
                double same = 0.0;
                for (std::size_t j = 0; j < a.size(); ++j) same += a[j] == b[j];
                double v = 0.0;
                switch (l.kind) {
                case KernelSpec::Kind::delta: v = same == positions ? 1.0 : 0.0; break;
                case KernelSpec::Kind::linear: v = same; break;
                case KernelSpec::Kind::rbf:
                    v = std::exp(-2.0 * (positions - same) / (2.0 * l.sigma * l.sigma));
                    break;
                case KernelSpec::Kind::wd: break;
                }
                lg(r, q) = v;
                lg(q, r) = v;
            }
        }
        break;
    }
    }
    return hsic_centered(setup.k_centered, lg);
}

ImportanceMap kernel_mfi_map(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                             const ConditionSpec &spec, const KernelMfiOptions &options) {
    const Layout layout = layout_for(mode, z.shape(), z.alphabet());
    const KernelSetup setup = prepare_kernel_mfi(z, s, mode, spec, options);
    const Eigen::MatrixXd &kc = setup.k_centered;
    const KernelSpec &l = setup.feature_kernel;
    const std::size_t m = setup.cs.m();
    const double norm = static_cast<double>(m - 1) * static_cast<double>(m - 1);

    ImportanceMap map(layout,
                      metadata(z, "kernel " + describe(mode) + " k=" + describe(options.score_kernel) +
                                      " l=" + describe(l),
                               describe(spec)),
                      z.alphabet());

    switch (mode.variant) {
    case ExplanationMode::Variant::unit:
        map.values[0] = evaluate(l, 1.0, 1.0) * kc.sum() / norm;
        break;

    case ExplanationMode::Variant::identity_image: {
        parallel_for(layout.size(), options.threads, [&](std::size_t p) {
            std::vector<double> v(m);
            for (std::size_t r = 0; r < m; ++r) v[r] = std::get<Image>(setup.xs[r])[p];
            double acc = 0.0;
            for (std::size_t r = 0; r < m; ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                acc += kc(ri, ri) * evaluate(l, v[r], v[r]);
                double off = 0.0;
                for (std::size_t q = r + 1; q < m; ++q) off += kc(static_cast<Eigen::Index>(q), ri) * evaluate(l, v[r], v[q]);
                acc += 2.0 * off;
            }
            map.values[p] = acc / norm;
        });
        break;
    }

    case ExplanationMode::Variant::sparse_pwm: {
        // For a 0/1 feature with on-set U and row-centered K:
        //   sum_ij Kc_ij l(v_i, v_j) = S (l(1,1) - 2 l(1,0) + l(0,0)),
        // S = sum over i, j in U of Kc_ij, which equals the same sum over the complement.
        std::vector<std::vector<std::size_t>> on(layout.size());
        for (std::size_t r = 0; r < m; ++r) {
            for (auto p : active_kmers(std::get<Sequence>(setup.xs[r]), z.alphabet(), mode.k)) on[p].push_back(r);
        }
        const double factor = evaluate(l, 1.0, 1.0) - 2.0 * evaluate(l, 1.0, 0.0) + evaluate(l, 0.0, 0.0);
        parallel_for(layout.size(), options.threads, [&](std::size_t p) {
            std::vector<std::size_t> members = on[p];
            if (members.size() > m / 2) {
                std::vector<std::size_t> complement;
                complement.reserve(m - members.size());
                std::size_t next = 0;
                for (std::size_t r = 0; r < m; ++r) {
                    if (next < members.size() && members[next] == r) {
                        ++next;
                    } else {
                        complement.push_back(r);
                    }
                }
                members = std::move(complement);
            }
            double total = 0.0;
            for (std::size_t a = 0; a < members.size(); ++a) {
                const auto ra = static_cast<Eigen::Index>(members[a]);
                double row = kc(ra, ra) * 0.5;
                for (std::size_t b = a + 1; b < members.size(); ++b) row += kc(static_cast<Eigen::Index>(members[b]), ra);
                total += 2.0 * row;
            }
            map.values[p] = total * factor / norm;
        });
        break;
    }
    }
    return map;
}

// ---------------------------------------------------------------------------

ImportanceMap poim(const SampleSet &z, const Predictor &s, std::size_t k, unsigned threads) {
    if (z.kind() != SampleKind::sequence) throw Error(ErrorCode::shape_mismatch, "POIM needs sequence samples");
    const Layout layout = Layout::po_matrix(z.alphabet(), k, z.shape().cols);
    const std::vector<double> scores = score_all(s, z.samples(), threads);
    const double global = mean(scores);

    std::vector<double> sum(layout.size(), 0.0);
    std::vector<std::size_t> count(layout.size(), 0);
    for (std::size_t r = 0; r < z.size(); ++r) {
        for (auto p : active_kmers(std::get<Sequence>(z[r]), z.alphabet(), k)) {
            sum[p] += scores[r];
            ++count[p];
        }
    }
    ImportanceMap map(layout, metadata(z, "poim(k=" + std::to_string(k) + ")", "exact"), z.alphabet());
    for (std::size_t p = 0; p < layout.size(); ++p) {
        if (count[p] > 0) map.values[p] = sum[p] / static_cast<double>(count[p]) - global;
    }
    return map;
}

FirmScore firm(const SampleSet &z, const Predictor &s, const Selector &selector) {
    // probe target only exercises the bounds checks
    if (std::holds_alternative<PixelSelector>(selector)) {
        validate_condition({selector, 0.0, Strategy::exact, 0.05}, z.shape(), z.alphabet());
    } else if (const auto *km = std::get_if<KmerSelector>(&selector)) {
        validate_condition({selector, std::string(km->k, z.alphabet().symbol(0)), Strategy::exact, 0.05},
                           z.shape(), z.alphabet());
    }
    const std::vector<double> scores = score_all(s, z.samples());

    FirmScore out;
    std::map<FeatureValue, double> sums;
    for (std::size_t r = 0; r < z.size(); ++r) {
        const FeatureValue t = feature_value(selector, z[r]);
        sums[t] += scores[r];
        ++out.counts[t];
    }
    const auto n = static_cast<double>(z.size());
    // the count-weighted mean of the conditional means is the plain mean score
    double overall = 0.0;
    for (double v : scores) overall += v;
    overall /= n;
    for (const auto &[t, total] : sums) out.conditional_means[t] = total / static_cast<double>(out.counts[t]);
    double variance = 0.0;
    for (const auto &[t, cond] : out.conditional_means) {
        const double d = cond - overall;
        variance += static_cast<double>(out.counts[t]) / n * d * d;
    }
    out.degenerate = out.conditional_means.size() < 2;
    out.value = out.degenerate ? 0.0 : std::sqrt(variance);
    return out;
}

// ---------------------------------------------------------------------------

ConvergenceCurve convergence_curve(const SampleSet &z, std::span<const std::size_t> sizes,
                                   const std::function<ImportanceMap(const SampleSet &)> &build) {
    if (sizes.size() < 2) throw Error(ErrorCode::invalid_argument, "convergence needs at least 2 sizes");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] == 0 || (i > 0 && sizes[i] <= sizes[i - 1])) {
            throw Error(ErrorCode::invalid_argument, "sizes must be positive and strictly increasing");
        }
    }
    if (sizes.back() > z.size()) {
        throw Error(ErrorCode::too_few_samples, "largest size " + std::to_string(sizes.back()) + " exceeds the " +
                                                    std::to_string(z.size()) + " available samples");
    }
    ConvergenceCurve curve;
    std::optional<ImportanceMap> previous;
    for (auto n : sizes) {
        const auto start = std::chrono::steady_clock::now();
        ImportanceMap map = build(z.prefix(n));
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        curve.sizes.push_back(n);
        curve.seconds.push_back(elapsed.count());
        if (previous) curve.distances.push_back(frobenius_distance(map, *previous));
        previous = std::move(map);
    }
    curve.final_norm = frobenius_norm(*previous);
    return curve;
}

ConvergenceCurve convergence_curve(const SampleSet &z, const Predictor &s, const ExplanationMode &mode,
                                   const ConditionSpec &spec, std::span<const std::size_t> sizes,
                                   const EstimatorOptions &options) {
    return convergence_curve(z, sizes, [&](const SampleSet &prefix) {
        return mfi_estimate(prefix, s, mode, spec, options);
    });
}

}  // namespace mfi
