#pragma once

#include "abacode/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace abacode {

/// Parameters of linear contextual Thompson Sampling.
///
/// The exploration scale is v = R * sqrt((24 / epsilon) * d * ln(1 / gamma)).
/// No canonical values for R, epsilon and gamma are published alongside the
/// algorithm; the defaults below are a choice and every experiment config can
/// override them.
struct CtsConfig {
    double R = 0.5;
    double epsilon = 0.5;
    double gamma = 0.1;
    std::size_t d = 1;
    std::size_t K = 1;
    std::uint64_t seed = 0;
    /// Replaces the computed v when set. v = 0 turns sampling into a greedy
    /// argmax over posterior means.
    std::optional<double> scale_override;

    /// Throws ErrorKind::Config when a field is out of range.
    void validate() const;
};

double exploration_scale(const CtsConfig& cfg);

/// Sufficient statistics of one arm's Gaussian posterior.
struct ArmPosterior {
    Matrix B;     // I + sum x x^T
    Matrix B_inv; // maintained by rank-1 updates
    Vector f;     // sum r x
    Vector mu_hat;
    std::uint64_t updates = 0;

    static ArmPosterior fresh(std::size_t d);
};

class CtsBandit {
public:
    /// Number of rank-1 inverse updates between full re-inversions of B.
    static constexpr std::uint64_t kRefreshInterval = 1000;

    explicit CtsBandit(const CtsConfig& cfg);

    std::size_t arms() const { return arms_.size(); }
    std::size_t dimension() const { return cfg_.d; }
    const CtsConfig& config() const { return cfg_; }
    double scale() const { return scale_; }

    /// Draws one posterior sample per arm and returns the arm maximizing
    /// x^T sample. Ties go to the lowest index.
    std::size_t sample_arm(const Vector& x);

    void update(std::size_t arm, const Vector& x, double reward);

    const Vector& posterior_mean(std::size_t arm) const;
    const ArmPosterior& arm(std::size_t i) const;

    /// Resets every arm to its initial state. The generator is not reseeded.
    void reinitialize();

    /// Opaque text form of the sampling generator (engine plus normal
    /// distribution cache).
    std::string generator_state() const;
    void set_generator_state(const std::string& state);

    void save(std::ostream& out) const;
    static CtsBandit load(std::istream& in);

private:
    void check_context(const Vector& x) const;

    CtsConfig cfg_;
    double scale_;
    std::vector<ArmPosterior> arms_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace abacode
