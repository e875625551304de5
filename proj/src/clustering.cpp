#include "abacode/clustering.hpp"

#include "abacode/binary_io.hpp"

#include <cmath>
#include <limits>

namespace abacode {

namespace {

void check_dimension(const ClusterModel& model, const Vector& x) {
    require(static_cast<std::size_t>(x.size()) == model.dimension(), ErrorKind::Input,
            "clustering: point has dimension " + std::to_string(x.size()) + ", expected " +
                std::to_string(model.dimension()));
}

std::size_t nearest(const Matrix& centroids, const Eigen::Ref<const Vector>& x, double* dist = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
        const double d = (centroids.row(j).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(j);
        }
    }
    if (dist)
        *dist = best_d;
    return best;
}

Matrix kmeanspp_seed(const Dataset& data, std::size_t k, Rng& rng) {
    const auto N = data.rows();
    Matrix centroids(static_cast<Eigen::Index>(k), data.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    centroids.row(0) = data.row(pick(rng));
    Vector d2 = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (std::size_t c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            chosen = N - 1;
            for (Eigen::Index i = 0; i < N; ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        const auto ci = static_cast<Eigen::Index>(c);
        centroids.row(ci) = data.row(chosen);
        d2 = d2.cwiseMin((data.rowwise() - centroids.row(ci)).rowwise().squaredNorm());
    }
    return centroids;
}

} // namespace

ClusterModel kmeans_fit(const Dataset& data, std::size_t k, std::uint64_t seed, KMeansTrace* trace) {
    require(k >= 1, ErrorKind::Input, "kmeans: k must be at least 1");
    require(static_cast<std::size_t>(data.rows()) >= k, ErrorKind::Input,
            "kmeans: " + std::to_string(data.rows()) + " points cannot form " + std::to_string(k) + " clusters");
    require(data.allFinite(), ErrorKind::Input, "kmeans: data contains non-finite values");

    Rng rng(seed);
    const auto N = data.rows();
    const auto ki = static_cast<Eigen::Index>(k);
    ClusterModel model;
    model.centroids = kmeanspp_seed(data, k, rng);

    KMeansTrace local;
    std::vector<std::size_t> assignment(static_cast<std::size_t>(N), k); // k = unassigned
    Vector dist(N);
    bool suspend_check = false;

    for (std::size_t iter = 0; iter < kMaxLloydIterations; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto j = nearest(model.centroids, data.row(i).transpose(), &dist[i]);
            objective += dist[i];
            auto& slot = assignment[static_cast<std::size_t>(i)];
            if (slot != j) {
                slot = j;
                changed = true;
            }
        }
        if (!local.objective.empty() && !suspend_check) {
            const double prev = local.objective.back();
            if (objective > prev + 1e-9 * std::max(1.0, std::abs(prev)))
                fail(ErrorKind::Numerical, "kmeans: objective increased from " + std::to_string(prev) + " to " +
                                               std::to_string(objective) + " at iteration " +
                                               std::to_string(iter));
        }
        local.objective.push_back(objective);
        local.iterations = iter + 1;
        suspend_check = false;

        if (!changed && iter > 0) {
            local.converged = true;
            local.reseeded.push_back(false);
            break;
        }

        Matrix sums = Matrix::Zero(ki, data.cols());
        std::vector<std::uint64_t> counts(k, 0);
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto j = assignment[static_cast<std::size_t>(i)];
            sums.row(static_cast<Eigen::Index>(j)) += data.row(i);
            ++counts[j];
        }
        bool reseeded = false;
        for (std::size_t j = 0; j < k; ++j) {
            const auto ji = static_cast<Eigen::Index>(j);
            if (counts[j] > 0) {
                model.centroids.row(ji) = sums.row(ji) / static_cast<double>(counts[j]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its own centroid.
            Eigen::Index far;
            dist.maxCoeff(&far);
            model.centroids.row(ji) = data.row(far);
            dist[far] = 0.0;
            reseeded = true;
        }
        local.reseeded.push_back(reseeded);
        suspend_check = reseeded;
    }

    model.counts.assign(k, 0);
    for (Eigen::Index i = 0; i < N; ++i)
        ++model.counts[nearest(model.centroids, data.row(i).transpose())];
    if (trace)
        *trace = std::move(local);
    return model;
}

std::size_t assign_cluster(const ClusterModel& model, const Vector& x) {
    check_dimension(model, x);
    return nearest(model.centroids, x);
}

void update_cluster_online(ClusterModel& model, const Vector& x, std::size_t j) {
    require(j < model.k(), ErrorKind::Input,
            "clustering: cluster index " + std::to_string(j) + " out of range for k=" + std::to_string(model.k()));
    check_dimension(model, x);
    ++model.counts[j];
    const auto ji = static_cast<Eigen::Index>(j);
    model.centroids.row(ji) += (x.transpose() - model.centroids.row(ji)) / static_cast<double>(model.counts[j]);
}

double kmeans_objective(const ClusterModel& model, const Dataset& data) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        double d = 0.0;
        nearest(model.centroids, data.row(i).transpose(), &d);
        total += d;
    }
    return total;
}

void ClusterModel::save(std::ostream& out) const {
    io::Writer w(out);
    w.header(io::RecordKind::Clusters);
    w.u64(k());
    w.u64(dimension());
    for (const auto c : counts)
        w.u64(c);
    w.matrix(centroids);
}

ClusterModel ClusterModel::load(std::istream& in) {
    io::Reader r(in);
    r.header(io::RecordKind::Clusters);
    const auto k = r.u64();
    const auto D = r.u64();
    require(k >= 1 && D >= 1, ErrorKind::Load, "cluster snapshot: zero dimension");
    require(k <= (std::uint64_t{1} << 24), ErrorKind::Load, "cluster snapshot: k out of range");
    ClusterModel m;
    m.counts.resize(k);
    for (auto& c : m.counts)
        c = r.u64();
    m.centroids = r.matrix(k, D);
    return m;
}

} // namespace abacode
