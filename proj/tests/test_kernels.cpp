#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "mfi/kernels.hpp"
#include "oracles.hpp"

using namespace mfi;

namespace {

std::vector<Sample> random_images(std::size_t n, std::size_t d, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Image img(1, d);
        for (auto &p : img.pixels()) p = u(rng);
        out.emplace_back(std::move(img));
    }
    return out;
}

std::vector<Sample> random_sequences(std::size_t n, std::size_t length, std::mt19937_64 &rng) {
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string s(length, 'A');
        for (auto &c : s) c = "ACGT"[pick(rng)];
        out.emplace_back(std::move(s));
    }
    return out;
}

/// Direct substring-by-substring count, independent of the run-length evaluation.
double wd_by_enumeration(const std::string &x, const std::string &y, std::size_t degree) {
    double total = 0.0;
    for (std::size_t d = 1; d <= degree; ++d) {
        const double beta = 2.0 * static_cast<double>(degree - d + 1) / static_cast<double>(degree * (degree + 1));
        for (std::size_t i = 0; i + d <= x.size(); ++i) total += beta * (x.compare(i, d, y, i, d) == 0);
    }
    return total;
}

double min_eigenvalue(const Eigen::MatrixXd &m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("rbf") {
    const std::vector<double> x{0.3, -1.2, 4.0};
    CHECK(rbf_eval(x, x, 0.7) == 1.0);
    const std::vector<double> a{0.0}, b{1.0};
    CHECK(rbf_eval(a, b, 1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(rbf_eval(a, b, 1.0) == doctest::Approx(0.6065306597));
    double previous = 0.0;
    for (double sigma : {0.5, 1.0, 2.0, 10.0, 100.0, 1e4}) {
        const double v = rbf_eval(x, std::vector<double>{1.0, 1.0, 1.0}, sigma);
        CHECK(v > previous);
        CHECK(v <= 1.0);
        previous = v;
    }
    CHECK(previous == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(rbf_eval(a, x, 1.0), Error);
}

TEST_CASE("wd kernel hand-enumerated values") {
    CHECK(wd_eval("ACG", "ACG", 2) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
    CHECK(wd_eval("ACG", "ACT", 2) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(wd_eval("AAAA", "CCCC", 3) == 0.0);
    CHECK_THROWS_AS(wd_eval("ACG", "AC", 1), Error);
    CHECK_THROWS_AS(wd_eval("ACG", "ACG", 4), Error);
    CHECK_THROWS_AS(wd_eval("ACG", "ACG", 0), Error);
}

TEST_CASE("wd kernel matches substring enumeration, is symmetric and maximal on the diagonal") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t length = 1 + trial % 20;
        const auto xs = random_sequences(2, length, rng);
        const auto &x = std::get<Sequence>(xs[0]);
        auto y = std::get<Sequence>(xs[1]);
        // share a random prefix so long matches occur
        for (std::size_t i = 0; i < length / 2; ++i) y[i] = x[i];
        const std::size_t degree = 1 + static_cast<std::size_t>(trial) % length;
        CHECK(wd_eval(x, y, degree) == doctest::Approx(wd_by_enumeration(x, y, degree)).epsilon(1e-12));
        CHECK(wd_eval(x, y, degree) == wd_eval(y, x, degree));
        CHECK(wd_eval(x, x, degree) >= wd_eval(x, y, degree));
    }
}

TEST_CASE("delta kernel") {
    CHECK(delta_eval(std::string("AC"), std::string("AC")) == 1.0);
    CHECK(delta_eval(std::string("AC"), std::string("AG")) == 0.0);
    CHECK(delta_eval(0.5, 0.5) == 1.0);
}

TEST_CASE("gram construction") {
    SUBCASE("single sample") {
        const std::vector<Sample> one{Sample{Image(1, 3, 0.2)}};
        const auto g = gram(one, KernelSpec::rbf(1.0));
        CHECK(g.entries.rows() == 1);
        CHECK(g.entries(0, 0) == 1.0);
    }
    SUBCASE("identical samples") {
        const std::vector<Sample> two{Sample{std::string("ACGT")}, Sample{std::string("ACGT")}};
        const auto g = gram(two, KernelSpec::wd(2));
        CHECK(g.entries(0, 0) == g.entries(0, 1));
        CHECK(g.entries(1, 0) == g.entries(1, 1));
    }
    SUBCASE("linear kernel equals pairwise dot products") {
        std::vector<Sample> xs{Sample{Image(1, 3, std::vector<double>{1, 2, 3})},
                               Sample{Image(1, 3, std::vector<double>{0, -1, 4})},
                               Sample{Image(1, 3, std::vector<double>{2, 2, 0.5})}};
        const auto g = gram(xs, KernelSpec::linear());
        const double expected[3][3] = {{14, 10, 7.5}, {10, 17, 0}, {7.5, 0, 8.25}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(g.entries(i, j) == expected[i][j]);
    }
    SUBCASE("incompatible kernels") {
        const std::vector<Sample> seqs{Sample{std::string("AC")}};
        CHECK_THROWS_AS(gram(seqs, KernelSpec::rbf(1.0)), Error);
        const std::vector<Sample> imgs{Sample{Image(1, 2)}};
        CHECK_THROWS_AS(gram(imgs, KernelSpec::wd(1)), Error);
    }
    SUBCASE("threaded construction is identical") {
        std::mt19937_64 rng(3);
        const auto xs = random_sequences(37, 12, rng);
        CHECK(gram(xs, KernelSpec::wd(4), 1).entries == gram(xs, KernelSpec::wd(4), 4).entries);
    }
}

TEST_CASE("Gram matrices are symmetric positive semi-definite") {
    std::mt19937_64 rng(5);
    for (std::size_t n : {2u, 7u, 20u, 50u}) {
        const auto imgs = random_images(n, 6, rng);
        const auto seqs = random_sequences(n, 10, rng);
        for (const auto &g : {gram(imgs, KernelSpec::rbf(0.8)), gram(imgs, KernelSpec::linear()),
                              gram(imgs, KernelSpec::delta()), gram(seqs, KernelSpec::wd(5)),
                              gram(seqs, KernelSpec::delta())}) {
            CHECK((g.entries - g.entries.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(g.entries.diagonal().minCoeff() >= 0.0);
            CHECK(min_eigenvalue(g.entries) >= -1e-9);
        }
    }
}

TEST_CASE("centering") {
    SUBCASE("constant matrix is annihilated") {
        const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 4, 2.5);
        CHECK(center(c).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("2x2 closed form") {
        const double a = 0.3;
        Eigen::MatrixXd g(2, 2);
        g << 1, a, a, 1;
        Eigen::MatrixXd expected(2, 2);
        expected << 1, -1, -1, 1;
        expected *= (1 - a) / 2;
        CHECK((center(g) - expected).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SUBCASE("idempotent with zero row sums") {
        std::mt19937_64 rng(9);
        const auto xs = random_images(12, 4, rng);
        const auto g = center_gram(gram(xs, KernelSpec::rbf(0.5)));
        CHECK(g.centered);
        CHECK(g.entries.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(g.entries.colwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((center(g.entries) - g.entries).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("hsic") {
    SUBCASE("2x2 closed form (1-a)(1-b)") {
        for (double a : {0.0, 0.25, 0.9}) {
            for (double b : {0.1, 0.5, 1.0}) {
                Eigen::MatrixXd K(2, 2), L(2, 2);
                K << 1, a, a, 1;
                L << 1, b, b, 1;
                CHECK(hsic(K, L) == doctest::Approx((1 - a) * (1 - b)).epsilon(1e-14));
            }
        }
    }
    SUBCASE("constant variable gives zero") {
        Eigen::MatrixXd K = Eigen::MatrixXd::Ones(2, 2);
        Eigen::MatrixXd L(2, 2);
        L << 1, 0.2, 0.2, 1;
        CHECK(hsic(K, L) == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("matches the double-sum expansion, is symmetric and non-negative") {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 25; ++trial) {
            const std::size_t n = 2 + static_cast<std::size_t>(trial) % 9;
            const auto xs = random_images(n, 3, rng);
            const auto ys = random_sequences(n, 8, rng);
            const auto K = gram(xs, KernelSpec::rbf(0.6));
            const auto L = gram(ys, KernelSpec::wd(3));
            const double h = hsic(K, L);
            CHECK(std::abs(h - oracle::hsic_expansion(K.entries, L.entries)) <= 1e-10);
            CHECK(h == doctest::Approx(hsic(L, K)).epsilon(1e-12));
            CHECK(h >= -1e-12);
            CHECK(hsic(center_gram(K), L) == doctest::Approx(h).epsilon(1e-12));
        }
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(hsic(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(3, 3)), Error);
    }
}
