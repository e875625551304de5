#pragma once

#include "abacode/common.hpp"
#include "abacode/encoders.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace abacode {

/// Extra per-round fields reported by the compression agent.
struct CompressionStep {
    std::size_t level = 0;
    double c = 0.0;
    double r_k = 0.0;
    double r_p = 0.0;
};

/// A bandit policy driven by strictly alternating step/observe calls. Agents
/// only ever see contexts and the scalar reward of the arm they chose.
class Agent {
public:
    virtual ~Agent() = default;

    /// Fits whatever the policy learns from unlabeled history.
    virtual void pretrain(const Dataset& unlabeled) = 0;
    virtual std::size_t step(const Vector& x) = 0;
    virtual void observe(double reward) = 0;

    /// Context dimension the agent was pretrained for (0 before pretraining).
    virtual std::size_t input_dim() const = 0;

    virtual std::optional<CompressionStep> last_compression() const { return std::nullopt; }

    virtual void save(std::ostream& out) const = 0;
};

} // namespace abacode
