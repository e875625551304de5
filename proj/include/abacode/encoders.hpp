#pragma once

#include "abacode/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

namespace abacode {

/// Data sets are stored one point per row.
using Dataset = Matrix;

struct TrainConfig {
    std::size_t epochs = 20;
    double learning_rate = 0.5;
    std::size_t minibatch_size = 16;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One-hidden-layer sigmoid autoencoder: h = sigmoid(W1 x + b1),
/// y = sigmoid(W2 h + b2). Inputs are expected in [0, 1].
struct AutoencoderModel {
    Matrix W1; // n x D
    Vector b1; // n
    Matrix W2; // D x n
    Vector b2; // D
    /// Number of completed training calls; seeds the minibatch shuffles of
    /// the next call so fine-tuning stays reproducible across snapshots.
    std::uint64_t update_count = 0;

    std::size_t input_dim() const { return static_cast<std::size_t>(W1.cols()); }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(W1.rows()); }

    /// Uniform initialization in [-1/sqrt(D), 1/sqrt(D)].
    static AutoencoderModel random(std::size_t D, std::size_t n, std::uint64_t seed);
};

struct AutoencoderGradient {
    Matrix W1;
    Vector b1;
    Matrix W2;
    Vector b2;
};

struct TrainReport {
    double initial_mse = 0.0;
    std::vector<double> epoch_mse; // full-data MSE after each epoch
    double final_mse = 0.0;        // MSE of the returned parameters
};

Vector encode(const AutoencoderModel& model, const Vector& x);
Vector reconstruct(const AutoencoderModel& model, const Vector& x);

/// Mean squared reconstruction error per element: mean over points and
/// coordinates of (y - x)^2.
double reconstruction_mse(const AutoencoderModel& model, const Dataset& data);

/// Training objective: (1 / N) sum_i 0.5 * ||y_i - x_i||^2. Its minimizer is
/// the reconstruction-MSE minimizer; the scaling only fixes the step size.
double autoencoder_loss(const AutoencoderModel& model, const Dataset& data);
AutoencoderGradient autoencoder_gradient(const AutoencoderModel& model, const Dataset& data);

/// Minibatch SGD from a seeded random initialization. The returned model is
/// the best full-data-MSE parameter set seen at an epoch boundary (including
/// the initial one), so final_mse <= initial_mse always holds.
AutoencoderModel train_autoencoder(const Dataset& data, std::size_t hidden, const TrainConfig& cfg,
                                   TrainReport* report = nullptr);

/// Continues SGD from the current parameters for cfg.epochs passes.
void update_autoencoder(AutoencoderModel& model, const Dataset& batch, const TrainConfig& cfg,
                        TrainReport* report = nullptr);

/// Principal-subspace encoder: encode(x) = P (x - mean), rows of P orthonormal
/// and ordered by decreasing variance.
struct LinearEncoderModel {
    Vector mean;
    Matrix P; // m x D
    Vector variances; // eigenvalues of the sample covariance, descending (all D)

    std::size_t input_dim() const { return static_cast<std::size_t>(P.cols()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(P.rows()); }
};

LinearEncoderModel fit_linear_encoder(const Dataset& data, std::size_t m);
Vector encode(const LinearEncoderModel& model, const Vector& x);
Vector reconstruct(const LinearEncoderModel& model, const Vector& x);

/// Either kind of context-to-representation map.
class Encoder {
public:
    Encoder(AutoencoderModel model) : model_(std::move(model)) {}
    Encoder(LinearEncoderModel model) : model_(std::move(model)) {}

    bool is_autoencoder() const { return std::holds_alternative<AutoencoderModel>(model_); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;

    Vector encode(const Vector& x) const;
    Vector reconstruct(const Vector& x) const;

    AutoencoderModel& autoencoder() { return std::get<AutoencoderModel>(model_); }
    const AutoencoderModel& autoencoder() const { return std::get<AutoencoderModel>(model_); }
    const LinearEncoderModel& linear() const { return std::get<LinearEncoderModel>(model_); }

    void save(std::ostream& out) const;
    static Encoder load(std::istream& in);

private:
    std::variant<AutoencoderModel, LinearEncoderModel> model_;
};

} // namespace abacode
