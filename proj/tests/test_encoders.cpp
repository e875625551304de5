#include "abacode/encoders.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace abacode;
using abacode::testing::check_error;
using abacode::testing::random_data;
using abacode::testing::vec;

namespace {

TrainConfig train_config(std::size_t epochs, std::uint64_t seed = 1) {
    TrainConfig c;
    c.epochs = epochs;
    c.seed = seed;
    return c;
}

// Central differences on one parameter entry.
template <class Param>
double numeric_partial(AutoencoderModel model, Param AutoencoderModel::*member, Eigen::Index i, Eigen::Index j,
                       const Dataset& data) {
    const double h = 1e-6;
    auto& p = model.*member;
    const double saved = p(i, j);
    p(i, j) = saved + h;
    const double up = autoencoder_loss(model, data);
    p(i, j) = saved - h;
    const double down = autoencoder_loss(model, data);
    return (up - down) / (2 * h);
}

template <class Param>
double max_gradient_error(const AutoencoderModel& model, Param AutoencoderModel::*member, const Param& analytic,
                          const Dataset& data) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.rows(); ++i)
        for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
            const double numeric = numeric_partial(model, member, i, j, data);
            const double scale = std::max({std::abs(numeric), std::abs(analytic(i, j)), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic(i, j)) / scale);
        }
    return worst;
}

double mean_squared_norm(const Dataset& data, const LinearEncoderModel& model) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const Vector x = data.row(i).transpose();
        total += (reconstruct(model, x) - x).squaredNorm();
    }
    return total / static_cast<double>(data.rows());
}

Dataset gaussian_data(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Dataset d(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < d.cols(); ++j)
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            d(i, j) = n(rng) * static_cast<double>(j + 1);
    return d;
}

} // namespace

TEST_CASE("autoencoder gradient matches central differences") {
    const auto model = AutoencoderModel::random(5, 3, 42);
    const Dataset data = random_data(10, 5, 9);
    const auto g = autoencoder_gradient(model, data);
    CHECK(max_gradient_error(model, &AutoencoderModel::W1, g.W1, data) < 1e-4);
    CHECK(max_gradient_error(model, &AutoencoderModel::W2, g.W2, data) < 1e-4);
    CHECK(max_gradient_error(model, &AutoencoderModel::b1, g.b1, data) < 1e-4);
    CHECK(max_gradient_error(model, &AutoencoderModel::b2, g.b2, data) < 1e-4);
}

TEST_CASE("random initialization range and shapes") {
    const auto m = AutoencoderModel::random(16, 4, 3);
    CHECK(m.W1.rows() == 4);
    CHECK(m.W1.cols() == 16);
    CHECK(m.W2.rows() == 16);
    CHECK(m.W2.cols() == 4);
    const double bound = 1.0 / 4.0;
    CHECK(m.W1.cwiseAbs().maxCoeff() <= bound);
    CHECK(m.W2.cwiseAbs().maxCoeff() <= bound);
    check_error(ErrorKind::Input, [] { AutoencoderModel::random(0, 1, 1); });
}

TEST_CASE("train_autoencoder") {
    SUBCASE("constant data is learned") {
        const Vector v = vec({0.2, 0.7, 0.4, 0.9, 0.3});
        Dataset data(200, 5);
        for (Eigen::Index i = 0; i < 200; ++i)
            data.row(i) = v.transpose();
        const auto model = train_autoencoder(data, 1, train_config(50));
        CHECK((reconstruct(model, v) - v).squaredNorm() < 1e-3 * v.squaredNorm());
    }
    SUBCASE("first epoch descends with n = D") {
        const Dataset data = random_data(256, 6, 4);
        TrainReport report;
        train_autoencoder(data, 6, train_config(1), &report);
        REQUIRE(report.epoch_mse.size() == 1);
        CHECK(report.epoch_mse[0] < report.initial_mse);
    }
    SUBCASE("final never exceeds initial and matches the returned model") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Dataset data = random_data(64, 8, 100 + seed);
            TrainReport report;
            auto cfg = train_config(3, seed);
            cfg.learning_rate = 5.0;
            const auto model = train_autoencoder(data, 2, cfg, &report);
            CHECK(report.final_mse <= report.initial_mse);
            CHECK(reconstruction_mse(model, data) == doctest::Approx(report.final_mse).epsilon(1e-12));
        }
    }
    SUBCASE("deterministic given the seed") {
        const Dataset data = random_data(50, 4, 8);
        const auto a = train_autoencoder(data, 2, train_config(3, 77));
        const auto b = train_autoencoder(data, 2, train_config(3, 77));
        CHECK(a.W1 == b.W1);
        CHECK(a.b2 == b.b2);
    }
    SUBCASE("errors") {
        check_error(ErrorKind::Input, [] { train_autoencoder(Dataset(0, 3), 1, train_config(1)); });
        check_error(ErrorKind::Input, [] { train_autoencoder(random_data(4, 3, 1), 0, train_config(1)); });
        check_error(ErrorKind::Config, [] { train_autoencoder(random_data(4, 3, 1), 1, train_config(0)); });
        auto cfg = train_config(5);
        cfg.learning_rate = 1e300;
        check_error(ErrorKind::Training, [&] { train_autoencoder(random_data(20, 3, 1, 0.0, 1e150), 2, cfg); });
    }
}

TEST_CASE("update_autoencoder") {
    SUBCASE("zero-gradient fixed point leaves parameters unchanged") {
        auto model = AutoencoderModel::random(4, 2, 5);
        model.W2.setZero();
        model.b2.setZero();
        const Dataset batch = Dataset::Constant(10, 4, 0.5);
        const auto before = model;
        update_autoencoder(model, batch, train_config(3));
        CHECK(model.W1 == before.W1);
        CHECK(model.b1 == before.b1);
        CHECK(model.W2 == before.W2);
        CHECK(model.b2 == before.b2);
    }
    SUBCASE("fine-tuning on a shifted batch reduces its error") {
        auto model = train_autoencoder(random_data(200, 6, 1, 0.0, 0.5), 3, train_config(5));
        const Dataset shifted = random_data(100, 6, 2, 0.5, 1.0);
        const double before = reconstruction_mse(model, shifted);
        update_autoencoder(model, shifted, train_config(5, 3));
        CHECK(reconstruction_mse(model, shifted) < before);
        CHECK(model.update_count >= 1);
    }
    SUBCASE("empty batch") {
        auto model = AutoencoderModel::random(3, 1, 1);
        check_error(ErrorKind::Input, [&] { update_autoencoder(model, Dataset(0, 3), train_config(1)); });
    }
}

TEST_CASE("fit_linear_encoder") {
    SUBCASE("rank-1 line in R3") {
        Dataset data(30, 3);
        for (Eigen::Index i = 0; i < 30; ++i)
            data.row(i) = (vec({1, 2, 3}) + 0.1 * static_cast<double>(i) * vec({0.5, -1, 2})).transpose();
        const auto model = fit_linear_encoder(data, 1);
        CHECK(mean_squared_norm(data, model) <= 1e-10);
    }
    SUBCASE("m = D is lossless") {
        const Dataset data = gaussian_data(40, 5, 3);
        CHECK(mean_squared_norm(data, fit_linear_encoder(data, 5)) <= 1e-10);
    }
    SUBCASE("error equals the discarded eigenvalues") {
        const Dataset data = gaussian_data(500, 6, 8);
        const auto model = fit_linear_encoder(data, 2);
        const Matrix centered = data.rowwise() - data.colwise().mean();
        Eigen::JacobiSVD<Matrix> svd(centered);
        const Vector eig = svd.singularValues().array().square() / static_cast<double>(data.rows());
        CHECK(mean_squared_norm(data, model) == doctest::Approx(eig.tail(4).sum()).epsilon(1e-8));
        CHECK(model.variances.head(2).isApprox(eig.head(2), 1e-8));
    }
    SUBCASE("orthonormal rows, descending variance, orthogonal residuals") {
        const Dataset data = gaussian_data(200, 7, 2);
        const auto model = fit_linear_encoder(data, 3);
        CHECK(oracle::max_abs(model.P * model.P.transpose() - Matrix::Identity(3, 3)) <= 1e-8);
        for (Eigen::Index i = 1; i < model.variances.size(); ++i)
            CHECK(model.variances[i] <= model.variances[i - 1]);
        for (Eigen::Index i = 0; i < 20; ++i) {
            const Vector x = data.row(i).transpose();
            const Vector residual = x - reconstruct(model, x);
            CHECK((model.P * residual).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
    SUBCASE("errors") {
        check_error(ErrorKind::Input, [] { fit_linear_encoder(gaussian_data(10, 3, 1), 4); });
        check_error(ErrorKind::Input, [] { fit_linear_encoder(gaussian_data(10, 3, 1), 0); });
        check_error(ErrorKind::Input, [] { fit_linear_encoder(gaussian_data(1, 3, 1), 1); });
    }
}

TEST_CASE("encode") {
    const Dataset data = gaussian_data(50, 4, 5);
    const auto linear = fit_linear_encoder(data, 2);
    CHECK(encode(linear, linear.mean).isZero(1e-12));
    CHECK(encode(linear, vec({9, 9, 9, 9})).size() == 2);

    auto ae = AutoencoderModel::random(4, 3, 2);
    ae.W1.setZero();
    ae.b1.setZero();
    CHECK(encode(ae, vec({0.1, 0.9, 0.3, 0.4})).isApprox(Vector::Constant(3, 0.5)));

    check_error(ErrorKind::Input, [&] { encode(linear, vec({1, 2, 3})); });
    check_error(ErrorKind::Input, [&] { encode(ae, vec({1, 2})); });

    SUBCASE("round trip agrees with the reported training error") {
        const Dataset train = random_data(120, 6, 12);
        TrainReport report;
        const auto model = train_autoencoder(train, 3, train_config(4), &report);
        double total = 0.0;
        for (Eigen::Index i = 0; i < train.rows(); ++i) {
            const Vector x = train.row(i).transpose();
            total += (reconstruct(model, x) - x).squaredNorm();
        }
        CHECK(total / static_cast<double>(train.size()) <= report.final_mse + 1e-9);
    }
}

TEST_CASE("encoder snapshots round trip bitwise") {
    const Dataset data = random_data(40, 5, 6);
    for (const Encoder& enc : {Encoder(train_autoencoder(data, 2, train_config(2))),
                               Encoder(fit_linear_encoder(data, 3))}) {
        std::stringstream first;
        enc.save(first);
        const Encoder loaded = Encoder::load(first);
        std::stringstream second;
        loaded.save(second);
        CHECK(first.str() == second.str());
        CHECK(loaded.output_dim() == enc.output_dim());
        const Vector x = data.row(3).transpose();
        CHECK(loaded.encode(x) == enc.encode(x));
    }
    std::stringstream bad("ACDE\x09");
    check_error(ErrorKind::Load, [&] { Encoder::load(bad); });
    std::stringstream garbage("nope");
    check_error(ErrorKind::Load, [&] { Encoder::load(garbage); });
}
