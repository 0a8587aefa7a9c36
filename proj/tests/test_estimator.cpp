#include <doctest.h>

#include <cmath>
#include <random>

#include "mfi/data.hpp"
#include "mfi/estimator.hpp"
#include "oracles.hpp"

using namespace mfi;
using oracle::FunctionPredictor;

namespace {

SampleSet exhaustive(const std::string &symbols, std::size_t length) {
    return SampleSet::sequences(oracle::all_strings(symbols, length), Alphabet(symbols));
}

std::vector<double> scores_of(const Predictor &s, const SampleSet &z) {
    std::vector<double> out;
    for (const auto &x : z) out.push_back(s.score(x));
    return out;
}

std::vector<std::string> strings_of(const SampleSet &z) {
    std::vector<std::string> out;
    for (const auto &x : z) out.push_back(oracle::seq(x));
    return out;
}

/// Deterministic but irregular score on sequences.
double hash_score(const Sample &x) {
    const auto &s = oracle::seq(x);
    double v = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) v += std::sin(1.7 * static_cast<double>(i + 1) * s[i]) * (i % 3 + 1);
    return v;
}

SampleSet random_images(std::size_t n, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Image> out;
    for (std::size_t i = 0; i < n; ++i) {
        Image img(rows, cols);
        for (auto &p : img.pixels()) p = u(rng);
        out.push_back(std::move(img));
    }
    return SampleSet::images(std::move(out));
}

void check_same(const ImportanceMap &a, const ImportanceMap &b) {
    REQUIRE(a.layout == b.layout);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        REQUIRE(a.values[i].has_value() == b.values[i].has_value());
        if (a.values[i]) CHECK(*a.values[i] == *b.values[i]);
    }
}

}  // namespace

TEST_CASE("condition") {
    const auto z = SampleSet::sequences({"AAC", "AAG", "CCC"});
    const auto set = condition(z, ConditionSpec::kmer(0, "AA"));
    CHECK(set.indices == std::vector<std::size_t>{0, 1});
    CHECK(set.m() == 2);
    double total = 0.0;
    for (double w : set.weights) total += w;
    CHECK(total == doctest::Approx(1.0));

    CHECK(condition(z, ConditionSpec::constant()).m() == 3);
    CHECK_THROWS_AS(condition(z, ConditionSpec::kmer(0, "GG")), Error);

    const auto images = random_images(30, 3, 3, 1);
    CHECK_THROWS_AS(condition(images, ConditionSpec::pixel(1, 1, 0.137, Strategy::exact)), Error);
    const auto band = condition(images, ConditionSpec::pixel(1, 1, 0.5, Strategy::epsilon_band, 0.2));
    for (std::size_t i : band.indices) CHECK(std::abs(std::get<Image>(images[i])(1, 1) - 0.5) <= 0.2);

    const auto iv = condition(images, ConditionSpec::pixel(1, 1, 0.25));
    CHECK(iv.m() == 30);
    for (std::size_t r = 0; r < iv.m(); ++r) {
        const Sample materialized = iv.member(images, r);
        const auto &member = std::get<Image>(materialized);
        const auto &original = std::get<Image>(images[iv.indices[r]]);
        CHECK(member(1, 1) == 0.25);
        CHECK(member(0, 2) == original(0, 2));
    }
}

TEST_CASE("mfi_estimate hand arithmetic: s=(1,3), phi=(2,4) gives 1") {
    // Two 1x1 images with pixel values 2 and 4; s(x) = x - 1 gives scores 1 and 3.
    const auto z = SampleSet::images({Image(1, 1, 2.0), Image(1, 1, 4.0)});
    const FunctionPredictor s([](const Sample &x) { return std::get<Image>(x)[0] - 1.0; });
    const auto map = mfi_estimate(z, s, ExplanationMode::identity_image(), ConditionSpec::constant());
    CHECK(*map.values[0] == doctest::Approx(1.0).epsilon(1e-15));

    EstimatorOptions raw;
    raw.centered = false;
    const auto uncentered = mfi_estimate(z, s, ExplanationMode::identity_image(), ConditionSpec::constant(), raw);
    CHECK(*uncentered.values[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("mfi_estimate trivial cases") {
    const auto z = exhaustive("ACG", 3);
    const FunctionPredictor constant([](const Sample &) { return 2.5; });
    const FunctionPredictor varied(hash_score);
    for (std::size_t k = 1; k <= 3; ++k) {
        const auto map = model_importance(z, constant, ExplanationMode::sparse_pwm(k));
        for (const auto &v : map.values) CHECK(std::abs(*v) <= 1e-15);
    }
    const auto unit = mfi_estimate(z, varied, ExplanationMode::unit(), ConditionSpec::kmer(1, "C"));
    CHECK(unit.layout.kind == Layout::Kind::scalar);
    CHECK(*unit.values[0] == 0.0);
}

TEST_CASE("model sparse-pwm matches the brute-force covariance on exhaustive sets") {
    SUBCASE("documented example: L=2 over {A,C}, s=1{x1=A}") {
        const auto z = exhaustive("AC", 2);
        const FunctionPredictor s([](const Sample &x) { return oracle::seq(x)[0] == 'A' ? 1.0 : 0.0; });
        const auto map = model_importance(z, s, ExplanationMode::sparse_pwm(1));
        CHECK(*map.at(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(*map.at(1, 0) == doctest::Approx(-0.25).epsilon(1e-15));
        CHECK(std::abs(*map.at(0, 1)) <= 1e-15);
        CHECK(std::abs(*map.at(1, 1)) <= 1e-15);
    }
    SUBCASE("16 sequences of L=2 over ACGT, s=1{x1=A}") {
        const auto z = exhaustive("ACGT", 2);
        const FunctionPredictor s([](const Sample &x) { return oracle::seq(x)[0] == 'A' ? 1.0 : 0.0; });
        const auto map = model_importance(z, s, ExplanationMode::sparse_pwm(1));
        const auto expected = oracle::sparse_pwm_covariance(strings_of(z), scores_of(s, z), "ACGT", 1);
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(*map.at(y, j) - expected[y][j]) <= 1e-12);
        CHECK(*map.at(0, 0) == doctest::Approx(3.0 / 16.0));
    }
    SUBCASE("general scores, several alphabets, lengths and k") {
        const FunctionPredictor s(hash_score);
        for (const auto &[symbols, length] : std::vector<std::pair<std::string, std::size_t>>{
                 {"AC", 5}, {"ACG", 4}, {"ACGT", 3}, {"ACGT", 5}, {"AC", 10}}) {
            const auto z = exhaustive(symbols, length);
            const auto xs = strings_of(z);
            const auto scores = scores_of(s, z);
            for (std::size_t k = 1; k <= std::min<std::size_t>(length, 3); ++k) {
                const auto map = model_importance(z, s, ExplanationMode::sparse_pwm(k));
                const auto expected = oracle::sparse_pwm_covariance(xs, scores, symbols, k);
                CHECK(map.layout == Layout::po_matrix(Alphabet(symbols), k, length));
                double worst = 0.0;
                for (std::size_t y = 0; y < expected.size(); ++y)
                    for (std::size_t j = 0; j < expected[y].size(); ++j)
                        worst = std::max(worst, std::abs(*map.at(y, j) - expected[y][j]));
                CHECK(worst <= 1e-12);
            }
        }
    }
}

TEST_CASE("sparse-pwm on a conditioned subset") {
    const auto z = exhaustive("ACG", 4);
    const FunctionPredictor s(hash_score);
    const auto spec = ConditionSpec::kmer(1, "CG");
    const auto map = mfi_estimate(z, s, ExplanationMode::sparse_pwm(2), spec);
    std::vector<std::string> xs;
    std::vector<double> scores;
    for (const auto &x : z) {
        if (oracle::seq(x).substr(1, 2) == "CG") {
            xs.push_back(oracle::seq(x));
            scores.push_back(s.score(x));
        }
    }
    const auto expected = oracle::sparse_pwm_covariance(xs, scores, "ACG", 2);
    for (std::size_t y = 0; y < expected.size(); ++y)
        for (std::size_t j = 0; j < expected[y].size(); ++j) CHECK(std::abs(*map.at(y, j) - expected[y][j]) <= 1e-12);
}

TEST_CASE("identity-image mode") {
    const auto z = random_images(4000, 3, 3, 17);
    const FunctionPredictor s([](const Sample &x) { return std::get<Image>(x)(0, 0); });
    const auto map = model_importance(z, s, ExplanationMode::identity_image());
    CHECK(map.argmax() == 0u);
    // Var of U(0,1) is 1/12
    CHECK(std::abs(*map.values[0] - 1.0 / 12.0) <= 3.0 / std::sqrt(4000.0));
    for (std::size_t p = 1; p < 9; ++p) CHECK(std::abs(*map.values[p]) < *map.values[0] / 5);

    SUBCASE("direct covariance oracle") {
        const auto small = random_images(50, 2, 3, 4);
        const FunctionPredictor f([](const Sample &x) {
            const auto &img = std::get<Image>(x);
            return img(0, 1) * img(1, 2) + std::exp(img(1, 0));
        });
        const auto m = model_importance(small, f, ExplanationMode::identity_image());
        const auto scores = scores_of(f, small);
        const double mu_s = oracle::mean_of(scores);
        for (std::size_t p = 0; p < 6; ++p) {
            double mu_x = 0.0, e_sx = 0.0;
            for (std::size_t i = 0; i < small.size(); ++i) {
                const double v = std::get<Image>(small[i])[p];
                mu_x += v / 50.0;
                e_sx += scores[i] * v / 50.0;
            }
            CHECK(std::abs(*m.values[p] - (e_sx - mu_s * mu_x)) <= 1e-12);
        }
    }
}

TEST_CASE("centering invariance and scale equivariance") {
    const auto z = exhaustive("ACGT", 4);
    const FunctionPredictor s(hash_score);
    const auto base = model_importance(z, s, ExplanationMode::sparse_pwm(2));
    for (double c : {-3.0, 0.5, 1e3}) {
        const FunctionPredictor shifted([c](const Sample &x) { return hash_score(x) + c; });
        const auto m = model_importance(z, shifted, ExplanationMode::sparse_pwm(2));
        for (std::size_t i = 0; i < m.values.size(); ++i) CHECK(std::abs(*m.values[i] - *base.values[i]) <= 1e-12);
    }
    for (double c : {0.01, 2.0, 250.0}) {
        const FunctionPredictor scaled([c](const Sample &x) { return c * hash_score(x); });
        const auto m = model_importance(z, scaled, ExplanationMode::sparse_pwm(2));
        for (std::size_t i = 0; i < m.values.size(); ++i)
            CHECK(std::abs(*m.values[i] - c * *base.values[i]) <= 1e-12 * std::max(1.0, c));
        CHECK(m.argmax() == base.argmax());
    }
    const auto images = random_images(200, 4, 4, 8);
    const FunctionPredictor f([](const Sample &x) { return std::get<Image>(x)(2, 1) - std::get<Image>(x)(0, 3); });
    const FunctionPredictor f3([](const Sample &x) { return 3 * (std::get<Image>(x)(2, 1) - std::get<Image>(x)(0, 3)); });
    CHECK(model_importance(images, f, ExplanationMode::identity_image()).argmax() ==
          model_importance(images, f3, ExplanationMode::identity_image()).argmax());
}

TEST_CASE("threads do not change results") {
    const auto z = exhaustive("ACGT", 5);
    const FunctionPredictor s(hash_score);
    EstimatorOptions one, four;
    four.threads = 4;
    check_same(model_importance(z, s, ExplanationMode::sparse_pwm(3), one),
               model_importance(z, s, ExplanationMode::sparse_pwm(3), four));
    check_same(poim(z, s, 2, 1), poim(z, s, 2, 3));
}

TEST_CASE("instance importance") {
    SUBCASE("documented example: g=AA, k=1 exact") {
        const auto z = exhaustive("AC", 2);
        const FunctionPredictor s([](const Sample &x) { return oracle::seq(x) == "AA" ? 1.0 : 0.0; });
        InstanceOptions opts;
        opts.strategy = Strategy::exact;
        const auto map = instance_importance(z, s, Sample{std::string("AA")}, InstanceWindow::kmer(1), opts);
        CHECK(map.layout == Layout::positional(2, 1));
        CHECK(*map.values[0] == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(*map.values[1] == doctest::Approx(0.25).epsilon(1e-15));
        opts.subtract_global_mean = false;
        const auto raw = instance_importance(z, s, Sample{std::string("AA")}, InstanceWindow::kmer(1), opts);
        CHECK(*raw.values[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("matches the POIM oracle entries selected by g") {
        const auto z = exhaustive("ACG", 4);
        const FunctionPredictor s(hash_score);
        const auto expected = oracle::poim(strings_of(z), scores_of(s, z), "ACG", 2);
        const std::string g = "GACA";
        InstanceOptions opts;
        opts.strategy = Strategy::exact;
        const auto map = instance_importance(z, s, Sample{g}, InstanceWindow::kmer(2), opts);
        const Alphabet a("ACG");
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(*map.values[j] - expected[a.kmer_index(g.substr(j, 2))][j]) <= 1e-12);
    }
    SUBCASE("unobserved windows are missing") {
        const auto z = SampleSet::sequences({"AAA", "CCC"});
        const FunctionPredictor s(hash_score);
        InstanceOptions opts;
        opts.strategy = Strategy::exact;
        const auto map = instance_importance(z, s, Sample{std::string("AGA")}, InstanceWindow::kmer(1), opts);
        CHECK(map.values[0].has_value());
        CHECK_FALSE(map.values[1].has_value());
    }
    SUBCASE("constant predictor gives a zero map; intervene is deterministic") {
        const auto z = random_images(60, 3, 4, 2);
        const FunctionPredictor constant([](const Sample &) { return -1.0; });
        for (const auto &v : instance_importance(z, constant, z[0], InstanceWindow::pixel()).values)
            CHECK(std::abs(*v) <= 1e-15);
        const FunctionPredictor f([](const Sample &x) {
            const auto &img = std::get<Image>(x);
            return img(1, 1) * img(2, 3) - img(0, 0);
        });
        InstanceOptions threaded;
        threaded.threads = 3;
        check_same(instance_importance(z, f, z[5], InstanceWindow::pixel()),
                   instance_importance(z, f, z[5], InstanceWindow::pixel(), threaded));
    }
    SUBCASE("intervening with g's own value on g leaves s(g) unchanged") {
        const auto z = random_images(5, 2, 2, 12);
        const auto &g = z[3];
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 2; ++c) {
                const auto spec = ConditionSpec::pixel(r, c, std::get<Image>(g)(r, c));
                CHECK(std::get<Image>(condition(z, spec).member(z, 3)) == std::get<Image>(g));
            }
    }
}

TEST_CASE("poim") {
    SUBCASE("documented example") {
        const auto z = exhaustive("AC", 2);
        const FunctionPredictor s([](const Sample &x) { return oracle::seq(x)[0] == 'A' ? 1.0 : 0.0; });
        const auto map = poim(z, s, 1);
        CHECK(*map.at(0, 0) == doctest::Approx(0.5));
        CHECK(*map.at(1, 0) == doctest::Approx(-0.5));
        CHECK(std::abs(*map.at(0, 1)) <= 1e-15);
        CHECK(std::abs(*map.at(1, 1)) <= 1e-15);
    }
    SUBCASE("oracle equivalence and the sparse-pwm identity") {
        const FunctionPredictor s(hash_score);
        for (const auto &[symbols, length] :
             std::vector<std::pair<std::string, std::size_t>>{{"AC", 6}, {"ACG", 4}, {"ACGT", 4}}) {
            const auto z = exhaustive(symbols, length);
            for (std::size_t k = 1; k <= 3; ++k) {
                const auto expected = oracle::poim(strings_of(z), scores_of(s, z), symbols, k);
                const auto map = poim(z, s, k);
                const auto pwm = model_importance(z, s, ExplanationMode::sparse_pwm(k));
                const double p_po = std::pow(static_cast<double>(symbols.size()), -static_cast<double>(k));
                for (std::size_t y = 0; y < expected.size(); ++y)
                    for (std::size_t j = 0; j < expected[y].size(); ++j) {
                        CHECK(std::abs(*map.at(y, j) - expected[y][j]) <= 1e-12);
                        CHECK(std::abs(*map.at(y, j) * p_po - *pwm.at(y, j)) <= 1e-12);
                    }
            }
        }
    }
    SUBCASE("missing entries and k too large") {
        const auto z = SampleSet::sequences({"AAC", "AAG"});
        const FunctionPredictor s(hash_score);
        const auto map = poim(z, s, 1);
        CHECK_FALSE(map.at(Alphabet().kmer_index("T"), 0).has_value());
        CHECK(map.at(0, 0).has_value());
        CHECK_THROWS_AS(poim(z, s, 4), Error);
    }
}

TEST_CASE("firm") {
    SUBCASE("binary feature with conditional means 0 and 2 gives 1") {
        const auto z = exhaustive("AC", 1);
        const FunctionPredictor s([](const Sample &x) { return oracle::seq(x) == "A" ? 0.0 : 2.0; });
        const auto q = firm(z, s, KmerSelector{0, 1});
        CHECK(q.value == doctest::Approx(1.0).epsilon(1e-15));
        CHECK_FALSE(q.degenerate);
        CHECK(q.conditional_means.at(FeatureValue{std::string("C")}) == 2.0);
    }
    SUBCASE("constant predictor and single observed value") {
        const auto z = exhaustive("ACG", 3);
        const FunctionPredictor constant([](const Sample &) { return 4.0; });
        CHECK(firm(z, constant, KmerSelector{1, 2}).value == 0.0);
        const auto single = SampleSet::sequences({"AAC", "AAG"});
        const auto q = firm(single, FunctionPredictor(hash_score), KmerSelector{0, 2});
        CHECK(q.degenerate);
        CHECK(q.value == 0.0);
    }
    SUBCASE("oracle equivalence") {
        const FunctionPredictor s(hash_score);
        const auto z = exhaustive("ACGT", 4);
        const auto xs = strings_of(z);
        const auto scores = scores_of(s, z);
        for (std::size_t start = 0; start < 4; ++start) {
            for (std::size_t k = 1; start + k <= 4; ++k) {
                std::vector<std::string> features;
                for (const auto &x : xs) features.push_back(x.substr(start, k));
                CHECK(std::abs(firm(z, s, KmerSelector{start, k}).value - oracle::firm(features, scores)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("kernel MFI") {
    SUBCASE("two conditioned samples match (1-a)(1-b)") {
        // scores 0 and 1 under rbf(1): a = exp(-1/2); features 0 and 2 under rbf(1): b = exp(-2)
        const auto z = SampleSet::images({Image(1, 1, 0.0), Image(1, 1, 2.0)});
        const FunctionPredictor s([](const Sample &x) { return std::get<Image>(x)[0] / 2.0; });
        const double expected = (1 - std::exp(-0.5)) * (1 - std::exp(-2.0));
        CHECK(kernel_mfi(z, s, ExplanationMode::identity_image(), ConditionSpec::constant()) ==
              doctest::Approx(expected).epsilon(1e-14));
        const auto map = kernel_mfi_map(z, s, ExplanationMode::identity_image(), ConditionSpec::constant());
        CHECK(*map.values[0] == doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("constant scores or features give 0, fewer than 2 samples is an error") {
        const auto z = random_images(20, 2, 2, 5);
        const FunctionPredictor constant([](const Sample &) { return 1.0; });
        CHECK(std::abs(kernel_mfi(z, constant, ExplanationMode::identity_image(), ConditionSpec::constant())) <= 1e-12);
        const FunctionPredictor f([](const Sample &x) { return std::get<Image>(x)[0]; });
        CHECK(std::abs(kernel_mfi(z, f, ExplanationMode::unit(), ConditionSpec::constant())) <= 1e-12);
        const auto one = SampleSet::images({Image(2, 2, 0.3)});
        CHECK_THROWS_AS(kernel_mfi(one, f, ExplanationMode::identity_image(), ConditionSpec::constant()), Error);
    }
    SUBCASE("sparse-pwm per-feature map matches explicit Gram matrices") {
        const auto z = exhaustive("ACG", 3);
        const FunctionPredictor s(hash_score);
        KernelMfiOptions opts;
        opts.score_kernel = KernelSpec::rbf(0.7);
        const auto map = kernel_mfi_map(z, s, ExplanationMode::sparse_pwm(2), ConditionSpec::constant(), opts);
        const auto scores = scores_of(s, z);
        const auto K = gram(std::span<const double>(scores), KernelSpec::rbf(0.7));
        const Alphabet a("ACG");
        for (std::size_t y = 0; y < 9; ++y) {
            for (std::size_t j = 0; j < 2; ++j) {
                std::vector<double> indicator;
                for (const auto &x : z) indicator.push_back(oracle::seq(x).substr(j, 2) == a.kmer(y, 2) ? 1.0 : 0.0);
                const auto L = gram(std::span<const double>(indicator), KernelSpec::delta());
                const double expected = oracle::hsic_expansion(K.entries, L.entries);
                CHECK(std::abs(*map.at(y, j) - expected) <= 1e-12);
                CHECK(*map.at(y, j) >= -1e-12);
            }
        }
    }
    SUBCASE("identity-image per-feature map peaks at the driving pixel") {
        const auto z = random_images(300, 4, 4, 31);
        const FunctionPredictor s([](const Sample &x) { return 3.0 * std::get<Image>(x)(1, 2); });
        const auto map = kernel_mfi_map(z, s, ExplanationMode::identity_image(), ConditionSpec::constant());
        CHECK(map.argmax() == 1u * 4 + 2);
        for (const auto &v : map.values) CHECK(*v >= -1e-12);
        KernelMfiOptions threaded;
        threaded.threads = 3;
        check_same(map, kernel_mfi_map(z, s, ExplanationMode::identity_image(), ConditionSpec::constant(), threaded));
    }
    SUBCASE("scalar form is non-negative") {
        const auto z = exhaustive("ACGT", 3);
        const FunctionPredictor s(hash_score);
        for (std::size_t k = 1; k <= 3; ++k)
            CHECK(kernel_mfi(z, s, ExplanationMode::sparse_pwm(k), ConditionSpec::constant()) >= -1e-12);
        CHECK(kernel_mfi(z, s, ExplanationMode::sparse_pwm(1), ConditionSpec::kmer(0, "A")) >= -1e-12);
    }
}

TEST_CASE("convergence curve") {
    const auto z = exhaustive("ACGT", 4);
    const std::vector<std::size_t> sizes{16, 64, 256};
    const FunctionPredictor constant([](const Sample &) { return 1.0; });
    const auto flat = convergence_curve(z, constant, ExplanationMode::sparse_pwm(1), ConditionSpec::constant(), sizes);
    CHECK(flat.sizes == sizes);
    REQUIRE(flat.distances.size() == 2);
    for (double d : flat.distances) CHECK(d == 0.0);
    CHECK(flat.seconds.size() == 3);

    const auto same = convergence_curve(z, sizes, [](const SampleSet &) {
        ImportanceMap m(Layout::grid(1, 2));
        m.values = {1.0, 2.0};
        return m;
    });
    for (double d : same.distances) CHECK(d == 0.0);
    CHECK(same.final_norm == doctest::Approx(std::sqrt(5.0)));

    const std::vector<std::size_t> bad{64, 16};
    CHECK_THROWS_AS(convergence_curve(z, constant, ExplanationMode::sparse_pwm(1), ConditionSpec::constant(), bad),
                    Error);
    const std::vector<std::size_t> too_big{16, 1000};
    CHECK_THROWS_AS(
        convergence_curve(z, constant, ExplanationMode::sparse_pwm(1), ConditionSpec::constant(), too_big), Error);
}
