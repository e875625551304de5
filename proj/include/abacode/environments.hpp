#pragma once

#include "abacode/common.hpp"
#include "abacode/encoders.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace abacode {

struct LabeledExample {
    Vector x;
    std::size_t label = 0;
};

struct LabeledData {
    std::vector<LabeledExample> examples;
    std::size_t classes = 0;
};

/// A materialized labeled stream: an unlabeled pre-training split and the
/// online examples that the environment replays round by round.
struct Stream {
    Dataset pretrain;
    std::vector<LabeledExample> online;
    /// Generating component (or cluster) of each online example; empty when
    /// unknown.
    std::vector<std::size_t> components;
    std::size_t component_count = 0;
    std::size_t classes = 0;
    std::size_t batch_size = 1000;

    std::size_t dimension() const { return static_cast<std::size_t>(pretrain.cols()); }
    std::size_t batches() const { return (online.size() + batch_size - 1) / batch_size; }
};

// --- ingestion ---------------------------------------------------------------

using LabelColumn = std::variant<std::size_t, std::string>;

/// Comma-separated rows; the first row is a header when the label column is
/// given by name or when any of its fields fails to parse as a number.
/// Labels are re-indexed 0..C-1 in order of first appearance.
LabeledData load_csv(const std::string& path, const LabelColumn& label_column);

/// IDX image/label pair (big-endian, magic 0x00000803 / 0x00000801). Pixels
/// are scaled by 1/255 and flattened row-major.
LabeledData load_idx(const std::string& images_path, const std::string& labels_path);

struct GaussianMixtureSpec {
    std::vector<Vector> means;
    double stddev = 1.0;
    std::vector<double> weights; // empty means uniform
    std::vector<std::size_t> labels; // empty means label = component index
};

/// Means drawn uniformly in [0, spread]^dimension; label of component j is
/// j mod classes.
GaussianMixtureSpec random_mixture(std::size_t components, std::size_t dimension, std::size_t classes, double spread,
                                   double stddev, std::uint64_t seed);

Stream synth_gaussian_mixture(const GaussianMixtureSpec& spec, std::size_t pretrain_count, std::size_t online_count,
                              std::size_t batch_size, std::uint64_t seed);

/// Splits labeled data into the first pretrain_count contexts (labels
/// dropped) and up to online_count following examples.
Stream split_stream(const LabeledData& data, std::size_t pretrain_count, std::size_t online_count,
                    std::size_t batch_size);

/// Min-max statistics from the pre-training split, applied to both splits;
/// online values are clipped into [0, 1]. Constant features map to 0.
void scale_min_max(Stream& stream);

// --- nonstationarity layers --------------------------------------------------

/// Each batch draws its examples cluster by cluster according to that
/// batch's weight vector. schedule.size() must equal stream.batches().
Stream apply_cluster_drift(Stream stream, const std::vector<std::vector<double>>& schedule, std::uint64_t seed);

/// Linear shift of cluster weights from favoring the first components to
/// favoring the last ones.
std::vector<std::vector<double>> ramp_schedule(std::size_t components, std::size_t batches);

/// Labels online examples by their nearest centroid of a k-means fit on the
/// pre-training split.
void assign_components(Stream& stream, std::size_t k, std::uint64_t seed);

enum class NegationMode { Half, Rand };

/// With probability p per example, x becomes 1 - x. p = 0.5 (half) or drawn
/// uniformly once per batch (rand).
Stream apply_negative_inputs(Stream stream, NegationMode mode, std::uint64_t seed);

/// One uniform label permutation per batch.
Stream apply_shuffled_labels(Stream stream, std::uint64_t seed);

/// Linear interpolation over index positions, endpoints preserved.
Vector stretch(const Vector& x, std::size_t target_dim);

/// Coin-flip interleaving of two streams at a common dimension; labels of b
/// are offset by a.classes.
Stream mix_domains(const Stream& a, const Stream& b, std::size_t target_dim, std::uint64_t seed);

inline double bandit_feedback(std::size_t chosen_arm, std::size_t label) {
    return chosen_arm == label ? 1.0 : 0.0;
}

/// Agent-facing side of a stream: contexts go out, only the 0/1 feedback bit
/// comes back. Replays from the start after the last example.
class BanditEnvironment {
public:
    explicit BanditEnvironment(std::shared_ptr<const Stream> stream);

    const Vector& context() const;
    /// Reveals whether arm was correct for the current context and advances.
    double feedback(std::size_t arm);

    std::size_t round() const { return round_; }
    std::size_t batch_index() const { return round_ / stream_->batch_size; }
    std::size_t arms() const { return stream_->classes; }
    std::size_t dimension() const { return stream_->dimension(); }

private:
    std::shared_ptr<const Stream> stream_;
    std::size_t round_ = 0;
};

// --- declarative stream description ------------------------------------------

struct CsvSource {
    std::string path;
    LabelColumn label_column = std::size_t{0};
};

struct IdxSource {
    std::string images;
    std::string labels;
};

struct SyntheticSource {
    std::size_t components = 4;
    std::size_t dimension = 32;
    std::size_t classes = 4;
    double spread = 1.0;
    double stddev = 0.5;
    std::vector<double> weights;
    /// Explicit means override the random ones when non-empty.
    std::vector<Vector> means;
    std::vector<std::size_t> labels;
};

using Source = std::variant<CsvSource, IdxSource, SyntheticSource>;

struct ClusterDriftLayer {
    /// Empty means ramp_schedule over the stream's components.
    std::vector<std::vector<double>> schedule;
};

struct NegativeInputsLayer {
    NegationMode mode = NegationMode::Half;
};

struct ShuffledLabelsLayer {};

struct MultiTaskLayer {
    std::shared_ptr<const Source> second;
    std::size_t pretrain_count = 0;
    std::size_t online_count = 0;
    std::size_t target_dim = 0; // 0 means the first stream's dimension
};

using Layer = std::variant<ClusterDriftLayer, NegativeInputsLayer, ShuffledLabelsLayer, MultiTaskLayer>;

struct StreamSpec {
    Source source = SyntheticSource{};
    std::size_t pretrain_count = 2000;
    std::size_t online_count = 20000;
    std::size_t batch_size = 1000;
    /// Cluster count used to define drift components for non-synthetic data.
    std::size_t drift_clusters = 4;
    std::vector<Layer> layers;
};

/// Loads or generates the source, scales it, then applies the layers in
/// order. Every random choice derives from seed.
Stream build_stream(const StreamSpec& spec, std::uint64_t seed);

} // namespace abacode
