#include "abacode/cts_bandit.hpp"

#include "abacode/binary_io.hpp"

#include <cmath>
#include <sstream>

namespace abacode {

void CtsConfig::validate() const {
    require(std::isfinite(R) && R > 0.0, ErrorKind::Config, "cts: R must be positive");
    require(epsilon > 0.0 && epsilon <= 1.0, ErrorKind::Config, "cts: epsilon must lie in (0, 1]");
    require(gamma > 0.0 && gamma <= 1.0, ErrorKind::Config, "cts: gamma must lie in (0, 1]");
    require(d >= 1, ErrorKind::Config, "cts: context dimension must be at least 1");
    require(K >= 1, ErrorKind::Config, "cts: arm count must be at least 1");
    if (scale_override)
        require(std::isfinite(*scale_override) && *scale_override >= 0.0, ErrorKind::Config,
                "cts: scale override must be finite and non-negative");
}

double exploration_scale(const CtsConfig& cfg) {
    cfg.validate();
    if (cfg.scale_override)
        return *cfg.scale_override;
    return cfg.R * std::sqrt((24.0 / cfg.epsilon) * static_cast<double>(cfg.d) * std::log(1.0 / cfg.gamma));
}

ArmPosterior ArmPosterior::fresh(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return ArmPosterior{Matrix::Identity(n, n), Matrix::Identity(n, n), Vector::Zero(n), Vector::Zero(n), 0};
}

CtsBandit::CtsBandit(const CtsConfig& cfg)
    : cfg_(cfg), scale_(exploration_scale(cfg)), arms_(cfg.K, ArmPosterior::fresh(cfg.d)), rng_(cfg.seed) {}

void CtsBandit::check_context(const Vector& x) const {
    require(static_cast<std::size_t>(x.size()) == cfg_.d, ErrorKind::Input,
            "cts: context has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(cfg_.d));
    require(x.allFinite(), ErrorKind::Input, "cts: context contains non-finite values");
}

std::size_t CtsBandit::sample_arm(const Vector& x) {
    check_context(x);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    const auto d = static_cast<Eigen::Index>(cfg_.d);
    Vector noise(d);
    for (std::size_t i = 0; i < arms_.size(); ++i) {
        const auto& a = arms_[i];
        double score = x.dot(a.mu_hat);
        if (scale_ > 0.0) {
            // Sample ~ N(mu_hat, v^2 B_inv) as mu_hat + v L xi with L L^T = B_inv.
            Eigen::LLT<Matrix> llt(a.B_inv);
            if (llt.info() != Eigen::Success)
                fail(ErrorKind::Numerical, "cts: posterior covariance of arm " + std::to_string(i) +
                                               " is not positive definite");
            for (Eigen::Index j = 0; j < d; ++j)
                noise[j] = normal_(rng_);
            score += scale_ * x.dot(llt.matrixL() * noise);
        }
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

void CtsBandit::update(std::size_t arm, const Vector& x, double reward) {
    require(arm < arms_.size(), ErrorKind::Input,
            "cts: arm index " + std::to_string(arm) + " out of range for " + std::to_string(arms_.size()) + " arms");
    check_context(x);
    require(std::isfinite(reward), ErrorKind::Input, "cts: reward must be finite");

    auto& a = arms_[arm];
    a.B.noalias() += x * x.transpose();
    a.f += reward * x;
    ++a.updates;

    if (a.updates % kRefreshInterval == 0) {
        a.B_inv = a.B.llt().solve(Matrix::Identity(a.B.rows(), a.B.cols()));
    } else {
        // Sherman-Morrison: (B + x x^T)^-1 = B^-1 - B^-1 x x^T B^-1 / (1 + x^T B^-1 x)
        const Vector bx = a.B_inv * x;
        const double denom = 1.0 + x.dot(bx);
        a.B_inv.noalias() -= (bx * bx.transpose()) / denom;
    }
    a.B_inv = 0.5 * (a.B_inv + a.B_inv.transpose()).eval();
    a.mu_hat.noalias() = a.B_inv * a.f;
}

const Vector& CtsBandit::posterior_mean(std::size_t arm) const {
    return this->arm(arm).mu_hat;
}

const ArmPosterior& CtsBandit::arm(std::size_t i) const {
    require(i < arms_.size(), ErrorKind::Input, "cts: arm index out of range");
    return arms_[i];
}

void CtsBandit::reinitialize() {
    for (auto& a : arms_)
        a = ArmPosterior::fresh(cfg_.d);
}

std::string CtsBandit::generator_state() const {
    std::ostringstream out;
    out << rng_ << ' ' << normal_;
    return out.str();
}

void CtsBandit::set_generator_state(const std::string& state) {
    std::istringstream in(state);
    Rng rng;
    std::normal_distribution<double> normal;
    in >> rng >> normal;
    require(!in.fail(), ErrorKind::Input, "cts: malformed generator state");
    rng_ = rng;
    normal_ = normal;
}

void CtsBandit::save(std::ostream& out) const {
    io::Writer w(out);
    w.header(io::RecordKind::Bandit);
    w.u64(cfg_.K);
    w.u64(cfg_.d);
    w.u64(cfg_.seed);
    w.f64(cfg_.R);
    w.f64(cfg_.epsilon);
    w.f64(cfg_.gamma);
    w.u8(cfg_.scale_override ? 1 : 0);
    w.f64(cfg_.scale_override.value_or(0.0));
    for (const auto& a : arms_) {
        w.u64(a.updates);
        w.matrix(a.B);
        w.matrix(a.B_inv);
        w.vector(a.f);
        w.vector(a.mu_hat);
    }
    w.bytes(generator_state());
}

CtsBandit CtsBandit::load(std::istream& in) {
    io::Reader r(in);
    r.header(io::RecordKind::Bandit);
    CtsConfig cfg;
    cfg.K = r.u64();
    cfg.d = r.u64();
    cfg.seed = r.u64();
    cfg.R = r.f64();
    cfg.epsilon = r.f64();
    cfg.gamma = r.f64();
    const bool has_override = r.u8() != 0;
    const double override_value = r.f64();
    if (has_override)
        cfg.scale_override = override_value;
    try {
        cfg.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Load, std::string("bandit snapshot: ") + e.what());
    }
    CtsBandit bandit(cfg);
    for (auto& a : bandit.arms_) {
        a.updates = r.u64();
        a.B = r.matrix(cfg.d, cfg.d);
        a.B_inv = r.matrix(cfg.d, cfg.d);
        a.f = r.vector(cfg.d);
        a.mu_hat = r.vector(cfg.d);
    }
    try {
        bandit.set_generator_state(r.bytes());
    } catch (const Error&) {
        fail(ErrorKind::Load, "bandit snapshot: corrupt generator state");
    }
    return bandit;
}

} // namespace abacode
