#pragma once

#include "abacode/common.hpp"
#include "abacode/encoders.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace abacode {

struct ClusterModel {
    Matrix centroids; // k x D
    std::vector<std::uint64_t> counts;

    std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
    std::size_t dimension() const { return static_cast<std::size_t>(centroids.cols()); }

    void save(std::ostream& out) const;
    static ClusterModel load(std::istream& in);
};

/// Per-iteration record of a Lloyd run.
struct KMeansTrace {
    std::vector<double> objective; // after each assignment step
    std::vector<bool> reseeded;    // an empty cluster was reseeded in that iteration
    std::size_t iterations = 0;
    bool converged = false;
};

inline constexpr std::size_t kMaxLloydIterations = 100;

/// Lloyd's algorithm with k-means++ seeding. Stops at an assignment fixpoint
/// or after kMaxLloydIterations. Throws ErrorKind::Numerical if the objective
/// ever increases outside a reseeding iteration.
ClusterModel kmeans_fit(const Dataset& data, std::size_t k, std::uint64_t seed, KMeansTrace* trace = nullptr);

/// Re-clusters the full accumulated history; same contract as kmeans_fit.
inline ClusterModel recompute_clusters(const Dataset& history, std::size_t k, std::uint64_t seed,
                                       KMeansTrace* trace = nullptr) {
    return kmeans_fit(history, k, seed, trace);
}

/// Nearest centroid in Euclidean distance; ties go to the lowest index.
std::size_t assign_cluster(const ClusterModel& model, const Vector& x);

/// Running-mean update of centroid j only.
void update_cluster_online(ClusterModel& model, const Vector& x, std::size_t j);

/// Within-cluster sum of squares of data under nearest-centroid assignment.
double kmeans_objective(const ClusterModel& model, const Dataset& data);

} // namespace abacode
