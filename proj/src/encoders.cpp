#include "abacode/encoders.hpp"

#include "abacode/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace abacode {

namespace {

Matrix sigmoid(const Matrix& a) {
    return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Vector sigmoid(const Vector& a) {
    return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct Forward {
    Matrix hidden; // N x n
    Matrix output; // N x D
};

Forward forward(const AutoencoderModel& m, const Dataset& X) {
    Forward f;
    f.hidden = sigmoid(Matrix((X * m.W1.transpose()).rowwise() + m.b1.transpose()));
    f.output = sigmoid(Matrix((f.hidden * m.W2.transpose()).rowwise() + m.b2.transpose()));
    return f;
}

void check_data(const Dataset& data, std::size_t D, const char* what) {
    require(data.rows() > 0, ErrorKind::Input, std::string(what) + ": data must be non-empty");
    require(static_cast<std::size_t>(data.cols()) == D, ErrorKind::Input,
            std::string(what) + ": data has dimension " + std::to_string(data.cols()) + ", expected " +
                std::to_string(D));
    require(data.allFinite(), ErrorKind::Input, std::string(what) + ": data contains non-finite values");
}

bool params_finite(const AutoencoderModel& m) {
    return m.W1.allFinite() && m.b1.allFinite() && m.W2.allFinite() && m.b2.allFinite();
}

void sgd(AutoencoderModel& model, const Dataset& data, const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    check_data(data, model.input_dim(), "autoencoder training");

    Rng rng(derive_seed(cfg.seed, model.update_count));
    ++model.update_count;

    const auto N = static_cast<std::size_t>(data.rows());
    std::vector<Eigen::Index> order(N);
    std::iota(order.begin(), order.end(), 0);

    double best_mse = reconstruction_mse(model, data);
    AutoencoderModel best = model;
    TrainReport local;
    local.initial_mse = best_mse;

    Dataset mb;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < N; start += cfg.minibatch_size) {
            const auto stop = std::min(N, start + cfg.minibatch_size);
            mb.resize(static_cast<Eigen::Index>(stop - start), data.cols());
            for (std::size_t i = start; i < stop; ++i)
                mb.row(static_cast<Eigen::Index>(i - start)) = data.row(order[i]);
            const auto g = autoencoder_gradient(model, mb);
            model.W1 -= cfg.learning_rate * g.W1;
            model.b1 -= cfg.learning_rate * g.b1;
            model.W2 -= cfg.learning_rate * g.W2;
            model.b2 -= cfg.learning_rate * g.b2;
        }
        const double mse = params_finite(model) ? reconstruction_mse(model, data)
                                                : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(mse)) {
            std::ostringstream msg;
            msg << "autoencoder training diverged at epoch " << epoch + 1 << " (learning_rate=" << cfg.learning_rate
                << ", minibatch_size=" << cfg.minibatch_size << ", initial_mse=" << local.initial_mse
                << ", best_mse=" << best_mse << ")";
            fail(ErrorKind::Training, msg.str());
        }
        local.epoch_mse.push_back(mse);
        if (mse < best_mse) {
            best_mse = mse;
            best.W1 = model.W1;
            best.b1 = model.b1;
            best.W2 = model.W2;
            best.b2 = model.b2;
        }
    }
    best.update_count = model.update_count;
    model = std::move(best);
    local.final_mse = best_mse;
    if (report)
        *report = std::move(local);
}

} // namespace

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorKind::Config, "train: epochs must be positive");
    require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorKind::Config,
            "train: learning_rate must be positive");
    require(minibatch_size >= 1, ErrorKind::Config, "train: minibatch_size must be positive");
}

AutoencoderModel AutoencoderModel::random(std::size_t D, std::size_t n, std::uint64_t seed) {
    require(D >= 1 && n >= 1, ErrorKind::Input, "autoencoder: dimensions must be positive");
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(D));
    std::uniform_real_distribution<double> u(-bound, bound);
    const auto draw = [&](auto&&...) { return u(rng); };
    const auto Di = static_cast<Eigen::Index>(D);
    const auto ni = static_cast<Eigen::Index>(n);
    AutoencoderModel m;
    m.W1 = Matrix::NullaryExpr(ni, Di, draw);
    m.b1 = Vector::NullaryExpr(ni, draw);
    m.W2 = Matrix::NullaryExpr(Di, ni, draw);
    m.b2 = Vector::NullaryExpr(Di, draw);
    return m;
}

Vector encode(const AutoencoderModel& model, const Vector& x) {
    require(static_cast<std::size_t>(x.size()) == model.input_dim(), ErrorKind::Input,
            "autoencoder: input has dimension " + std::to_string(x.size()) + ", expected " +
                std::to_string(model.input_dim()));
    return sigmoid(Vector(model.W1 * x + model.b1));
}

Vector reconstruct(const AutoencoderModel& model, const Vector& x) {
    return sigmoid(Vector(model.W2 * encode(model, x) + model.b2));
}

double reconstruction_mse(const AutoencoderModel& model, const Dataset& data) {
    check_data(data, model.input_dim(), "reconstruction_mse");
    const auto f = forward(model, data);
    return (f.output - data).squaredNorm() / static_cast<double>(data.size());
}

double autoencoder_loss(const AutoencoderModel& model, const Dataset& data) {
    check_data(data, model.input_dim(), "autoencoder_loss");
    const auto f = forward(model, data);
    return 0.5 * (f.output - data).squaredNorm() / static_cast<double>(data.rows());
}

AutoencoderGradient autoencoder_gradient(const AutoencoderModel& model, const Dataset& data) {
    const auto f = forward(model, data);
    const double inv_n = 1.0 / static_cast<double>(data.rows());
    const Matrix delta_out =
        ((f.output - data).array() * f.output.array() * (1.0 - f.output.array())).matrix();
    const Matrix delta_hidden =
        ((delta_out * model.W2).array() * f.hidden.array() * (1.0 - f.hidden.array())).matrix();
    AutoencoderGradient g;
    g.W2 = inv_n * delta_out.transpose() * f.hidden;
    g.b2 = inv_n * delta_out.colwise().sum().transpose();
    g.W1 = inv_n * delta_hidden.transpose() * data;
    g.b1 = inv_n * delta_hidden.colwise().sum().transpose();
    return g;
}

AutoencoderModel train_autoencoder(const Dataset& data, std::size_t hidden, const TrainConfig& cfg,
                                   TrainReport* report) {
    require(data.rows() > 0, ErrorKind::Input, "autoencoder training: data must be non-empty");
    require(hidden >= 1, ErrorKind::Input, "autoencoder training: hidden width must be at least 1");
    auto model = AutoencoderModel::random(static_cast<std::size_t>(data.cols()), hidden, derive_seed(cfg.seed, 0xae));
    sgd(model, data, cfg, report);
    return model;
}

void update_autoencoder(AutoencoderModel& model, const Dataset& batch, const TrainConfig& cfg, TrainReport* report) {
    require(batch.rows() > 0, ErrorKind::Input, "autoencoder update: batch must be non-empty");
    sgd(model, batch, cfg, report);
}

LinearEncoderModel fit_linear_encoder(const Dataset& data, std::size_t m) {
    const auto D = static_cast<std::size_t>(data.cols());
    require(data.rows() >= 2, ErrorKind::Input, "linear encoder: need at least 2 points");
    require(m >= 1 && m <= D, ErrorKind::Input,
            "linear encoder: target dimension " + std::to_string(m) + " outside [1, " + std::to_string(D) + "]");
    require(data.allFinite(), ErrorKind::Input, "linear encoder: data contains non-finite values");

    LinearEncoderModel model;
    model.mean = data.colwise().mean().transpose();
    const Matrix centered = data.rowwise() - model.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    require(eig.info() == Eigen::Success, ErrorKind::Numerical, "linear encoder: eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    const auto Di = static_cast<Eigen::Index>(D);
    model.variances = eig.eigenvalues().reverse();
    model.P.resize(static_cast<Eigen::Index>(m), Di);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(m); ++r) {
        Vector dir = eig.eigenvectors().col(Di - 1 - r);
        Eigen::Index pivot;
        dir.cwiseAbs().maxCoeff(&pivot);
        if (dir[pivot] < 0.0)
            dir = -dir;
        model.P.row(r) = dir.transpose();
    }
    return model;
}

Vector encode(const LinearEncoderModel& model, const Vector& x) {
    require(static_cast<std::size_t>(x.size()) == model.input_dim(), ErrorKind::Input,
            "linear encoder: input has dimension " + std::to_string(x.size()) + ", expected " +
                std::to_string(model.input_dim()));
    return model.P * (x - model.mean);
}

Vector reconstruct(const LinearEncoderModel& model, const Vector& x) {
    return model.P.transpose() * encode(model, x) + model.mean;
}

std::size_t Encoder::input_dim() const {
    return std::visit([](const auto& m) { return m.input_dim(); }, model_);
}

std::size_t Encoder::output_dim() const {
    if (const auto* ae = std::get_if<AutoencoderModel>(&model_))
        return ae->hidden_dim();
    return std::get<LinearEncoderModel>(model_).output_dim();
}

Vector Encoder::encode(const Vector& x) const {
    return std::visit([&](const auto& m) { return abacode::encode(m, x); }, model_);
}

Vector Encoder::reconstruct(const Vector& x) const {
    return std::visit([&](const auto& m) { return abacode::reconstruct(m, x); }, model_);
}

void Encoder::save(std::ostream& out) const {
    io::Writer w(out);
    if (const auto* ae = std::get_if<AutoencoderModel>(&model_)) {
        w.header(io::RecordKind::Autoencoder);
        w.u64(ae->input_dim());
        w.u64(ae->hidden_dim());
        w.u64(ae->update_count);
        w.matrix(ae->W1);
        w.vector(ae->b1);
        w.matrix(ae->W2);
        w.vector(ae->b2);
        return;
    }
    const auto& lin = std::get<LinearEncoderModel>(model_);
    w.header(io::RecordKind::LinearEncoder);
    w.u64(lin.input_dim());
    w.u64(lin.output_dim());
    w.vector(lin.mean);
    w.matrix(lin.P);
    w.vector(lin.variances);
}

Encoder Encoder::load(std::istream& in) {
    io::Reader r(in);
    const auto kind = r.header_any();
    if (kind == io::RecordKind::Autoencoder) {
        const auto D = r.u64();
        const auto n = r.u64();
        require(D >= 1 && n >= 1, ErrorKind::Load, "autoencoder snapshot: zero dimension");
        AutoencoderModel m;
        m.update_count = r.u64();
        m.W1 = r.matrix(n, D);
        m.b1 = r.vector(n);
        m.W2 = r.matrix(D, n);
        m.b2 = r.vector(D);
        return Encoder(std::move(m));
    }
    if (kind == io::RecordKind::LinearEncoder) {
        const auto D = r.u64();
        const auto m = r.u64();
        require(D >= 1 && m >= 1 && m <= D, ErrorKind::Load, "linear encoder snapshot: bad dimensions");
        LinearEncoderModel lin;
        lin.mean = r.vector(D);
        lin.P = r.matrix(m, D);
        lin.variances = r.vector(D);
        return Encoder(std::move(lin));
    }
    fail(ErrorKind::Load, "encoder snapshot: unexpected record kind " + std::to_string(static_cast<int>(kind)));
}

} // namespace abacode
