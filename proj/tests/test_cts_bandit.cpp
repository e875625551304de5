#include "abacode/binary_io.hpp"
#include "abacode/cts_bandit.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace abacode;
using abacode::testing::check_error;
using abacode::testing::vec;

namespace {

CtsConfig config(std::size_t K, std::size_t d, std::uint64_t seed = 7) {
    CtsConfig c;
    c.K = K;
    c.d = d;
    c.seed = seed;
    return c;
}

CtsConfig greedy(std::size_t K, std::size_t d) {
    auto c = config(K, d);
    c.scale_override = 0.0;
    return c;
}

Vector random_vector(Rng& rng, std::size_t d, double max_norm) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x = Vector::NullaryExpr(static_cast<Eigen::Index>(d), [&](auto&&...) { return u(rng); });
    std::uniform_real_distribution<double> len(0.0, max_norm);
    return x.normalized() * len(rng);
}

} // namespace

TEST_CASE("new bandit starts from identity posteriors") {
    CtsBandit b(config(3, 2));
    REQUIRE(b.arms() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(b.arm(i).B.isIdentity());
        CHECK(b.arm(i).B_inv.isIdentity());
        CHECK(b.arm(i).f.isZero());
        CHECK(b.posterior_mean(i) == Vector::Zero(2));
    }

    CtsBandit single(config(1, 1));
    CHECK(single.arm(0).B(0, 0) == 1.0);
}

TEST_CASE("invalid configurations are rejected") {
    check_error(ErrorKind::Config, [] { CtsBandit b(config(0, 2)); });
    check_error(ErrorKind::Config, [] { CtsBandit b(config(2, 0)); });
    auto c = config(2, 2);
    c.R = 0.0;
    check_error(ErrorKind::Config, [&] { CtsBandit b(c); });
    c = config(2, 2);
    c.epsilon = 1.5;
    check_error(ErrorKind::Config, [&] { CtsBandit b(c); });
    c = config(2, 2);
    c.gamma = 0.0;
    check_error(ErrorKind::Config, [&] { CtsBandit b(c); });
}

TEST_CASE("exploration scale closed form") {
    CtsConfig c = config(1, 1);
    c.R = 1.0;
    c.epsilon = 1.0;
    c.gamma = std::exp(-1.0);
    CHECK(exploration_scale(c) == doctest::Approx(4.898979485566356).epsilon(1e-12));

    c.R = 0.25;
    CHECK(exploration_scale(c) == doctest::Approx(1.224744871391589).epsilon(1e-12));

    // 50-digit reference: sqrt(48 * 4 * ln 10)
    c.R = 1.0;
    c.epsilon = 0.5;
    c.gamma = 0.1;
    c.d = 4;
    CHECK(exploration_scale(c) == doctest::Approx(21.026087079027728).epsilon(1e-12));

    c.gamma = 1.0;
    CHECK(exploration_scale(c) == 0.0);
}

TEST_CASE("sample_arm") {
    SUBCASE("zero scale on a fresh bandit ties to arm 0") {
        CtsBandit b(greedy(4, 3));
        CHECK(b.sample_arm(vec({0.3, -1.0, 2.0})) == 0);
    }
    SUBCASE("same seed gives the same choices") {
        CtsBandit a(config(5, 2, 99)), b(config(5, 2, 99));
        Rng rng(3);
        for (int t = 0; t < 200; ++t) {
            const Vector x = random_vector(rng, 2, 2.0);
            const auto ca = a.sample_arm(x);
            CHECK(ca == b.sample_arm(x));
            a.update(ca, x, t % 3 == 0 ? 1.0 : 0.0);
            b.update(ca, x, t % 3 == 0 ? 1.0 : 0.0);
        }
    }
    SUBCASE("greedy choice follows hand-built posteriors") {
        CtsBandit b(greedy(2, 2));
        // One update each: mu_0 = (0.5, 0), mu_1 = (0, 0.5).
        b.update(0, vec({1, 0}), 1.0);
        b.update(1, vec({0, 1}), 1.0);
        CHECK(b.posterior_mean(0).isApprox(vec({0.5, 0})));
        CHECK(b.posterior_mean(1).isApprox(vec({0, 0.5})));
        CHECK(b.sample_arm(vec({1, 0})) == 0);
        CHECK(b.sample_arm(vec({0, 1})) == 1);
        CHECK(b.sample_arm(vec({1, 1})) == 0); // tie
    }
    SUBCASE("dimension mismatch") {
        CtsBandit b(config(2, 3));
        check_error(ErrorKind::Input, [&] { b.sample_arm(vec({1, 2})); });
        check_error(ErrorKind::Input, [&] { b.sample_arm(vec({1, NAN, 2})); });
    }
}

TEST_CASE("greedy limit matches argmax of posterior means") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        CtsBandit b(greedy(4, 5));
        std::uniform_real_distribution<double> r(0.0, 1.0);
        for (int t = 0; t < 40; ++t)
            b.update(static_cast<std::size_t>(t % 4), random_vector(rng, 5, 3.0), r(rng));
        for (int q = 0; q < 20; ++q) {
            const Vector x = random_vector(rng, 5, 3.0);
            std::size_t best = 0;
            for (std::size_t i = 1; i < 4; ++i)
                if (x.dot(b.posterior_mean(i)) > x.dot(b.posterior_mean(best)))
                    best = i;
            CHECK(b.sample_arm(x) == best);
        }
    }
}

TEST_CASE("update algebra") {
    CtsBandit b(config(1, 2));
    b.update(0, vec({1, 0}), 1.0);
    CHECK(b.arm(0).B.isApprox((Matrix(2, 2) << 2, 0, 0, 1).finished()));
    CHECK(b.arm(0).f.isApprox(vec({1, 0})));
    CHECK(b.posterior_mean(0).isApprox(vec({0.5, 0})));

    // Zero reward: f fixed, B grows, mean shrinks.
    b.update(0, vec({1, 0}), 0.0);
    CHECK(b.arm(0).f.isApprox(vec({1, 0})));
    CHECK(b.arm(0).B(0, 0) == 3.0);
    CHECK(b.posterior_mean(0)[0] == doctest::Approx(1.0 / 3.0));

    check_error(ErrorKind::Input, [&] { b.update(1, vec({1, 0}), 1.0); });
    check_error(ErrorKind::Input, [&] { b.update(0, vec({1, 0, 0}), 1.0); });
}

TEST_CASE("posterior mean equals the batch ridge solution") {
    SUBCASE("fresh arm") {
        CtsBandit b(config(2, 3));
        CHECK(b.posterior_mean(1).isZero());
    }
    SUBCASE("two unit updates on e1") {
        CtsBandit b(config(1, 3));
        b.update(0, vec({1, 0, 0}), 1.0);
        b.update(0, vec({1, 0, 0}), 1.0);
        CHECK(b.posterior_mean(0)[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(b.posterior_mean(0).tail(2).isZero());
    }
    SUBCASE("random 50-update history, d = 8") {
        Rng rng(5);
        std::uniform_real_distribution<double> r(-1.0, 2.0);
        CtsBandit b(config(1, 8));
        std::vector<Vector> xs;
        std::vector<double> rs;
        for (int t = 0; t < 50; ++t) {
            xs.push_back(random_vector(rng, 8, 4.0));
            rs.push_back(r(rng));
            b.update(0, xs.back(), rs.back());
        }
        CHECK(oracle::rel_error(b.posterior_mean(0), oracle::batch_ridge(xs, rs, 8)) <= 1e-8);
    }
}

TEST_CASE("maintained inverse and replayed design matrix") {
    Rng rng(17);
    const std::size_t d = 32;
    CtsBandit b(config(2, d));
    Matrix replay = Matrix::Identity(d, d);
    for (int t = 0; t < 10000; ++t) {
        const Vector x = random_vector(rng, d, 10.0);
        b.update(0, x, 1.0);
        replay += x * x.transpose();
    }
    const auto& a = b.arm(0);
    CHECK(oracle::max_abs(a.B - replay) <= 1e-6 * oracle::max_abs(replay));
    CHECK(oracle::max_abs(a.B * a.B_inv - Matrix::Identity(d, d)) <= 1e-6);
    CHECK(oracle::max_abs(a.B_inv - oracle::brute_inverse(a.B)) <= 1e-6);
    // Untouched arm stays at the prior.
    CHECK(b.arm(1).B.isIdentity());
}

TEST_CASE("inverse matches brute force between refreshes") {
    Rng rng(23);
    CtsBandit b(config(1, 6));
    for (int t = 1; t <= 2500; ++t) {
        b.update(0, random_vector(rng, 6, 10.0), 0.5);
        if (t % 250 == 7)
            CHECK(oracle::max_abs(b.arm(0).B_inv - oracle::brute_inverse(b.arm(0).B)) <= 1e-6);
    }
}

TEST_CASE("reinitialize") {
    CtsBandit b(config(3, 4));
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
        const Vector x = random_vector(rng, 4, 2.0);
        b.update(b.sample_arm(x), x, 1.0);
    }
    b.reinitialize();
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(b.posterior_mean(i).isZero());
        CHECK(b.arm(i).B.isIdentity());
    }
    const auto once = b.arm(0).B;
    b.reinitialize();
    CHECK(b.arm(0).B == once);

    SUBCASE("behaves like a fresh bandit given the same draws") {
        CtsBandit fresh(config(3, 4, 12345));
        fresh.set_generator_state(b.generator_state());
        for (int t = 0; t < 100; ++t) {
            const Vector x = random_vector(rng, 4, 2.0);
            const auto arm = b.sample_arm(x);
            REQUIRE(arm == fresh.sample_arm(x));
            b.update(arm, x, t % 2);
            fresh.update(arm, x, t % 2);
        }
        CHECK(b.posterior_mean(1) == fresh.posterior_mean(1));
    }
}

TEST_CASE("snapshot round trip is bitwise") {
    CtsBandit b(config(3, 4, 8));
    Rng rng(4);
    for (int t = 0; t < 25; ++t) {
        const Vector x = random_vector(rng, 4, 2.0);
        b.update(b.sample_arm(x), x, 1.0 - t % 2);
    }
    std::stringstream first;
    b.save(first);
    auto loaded = CtsBandit::load(first);
    std::stringstream second;
    loaded.save(second);
    CHECK(first.str() == second.str());
    const Vector x = random_vector(rng, 4, 2.0);
    CHECK(b.sample_arm(x) == loaded.sample_arm(x));

    std::stringstream truncated(first.str().substr(0, 40));
    check_error(ErrorKind::Load, [&] { CtsBandit::load(truncated); });
}

TEST_CASE("non-positive-definite covariance is reported, not regularized") {
    // Hand-written snapshot with B_inv = -I.
    std::stringstream s;
    io::Writer w(s);
    w.header(io::RecordKind::Bandit);
    w.u64(1);
    w.u64(2);
    w.u64(0);
    w.f64(0.5);
    w.f64(0.5);
    w.f64(0.1);
    w.u8(0);
    w.f64(0.0);
    w.u64(0);
    w.matrix(Matrix::Identity(2, 2));
    w.matrix(-Matrix::Identity(2, 2));
    w.vector(Vector::Zero(2));
    w.vector(Vector::Zero(2));
    CtsBandit donor(config(1, 2));
    w.bytes(donor.generator_state());
    auto b = CtsBandit::load(s);
    check_error(ErrorKind::Numerical, [&] { b.sample_arm(vec({1, 0})); });
}
