#pragma once

// Per-class similarity terms o_i(x) for the data fidelity <-o, u>, and a
// seeded Lloyd k-means for estimating class means from pixel features.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esp/error.hpp"
#include "esp/grid.hpp"
#include "esp/stack.hpp"

namespace esp {

/// Image as one ScalarField per channel.
using Channels = std::vector<ScalarField>;
/// One value per channel.
using ChannelVector = std::vector<double>;

namespace detail {

inline void check_channels(const Channels& image) {
    if (image.empty()) throw InvalidArgument("similarity: image has no channels");
    for (const auto& ch : image)
        if (!ch.same_shape(image.front())) throw DimensionMismatch("similarity: channel shapes differ");
}

inline void check_means(const Channels& image, const std::vector<ChannelVector>& means) {
    if (means.empty()) throw InvalidArgument("similarity: at least one class required");
    for (const auto& m : means) {
        if (m.size() != image.size()) {
            throw DimensionMismatch("similarity: class mean has " + std::to_string(m.size()) +
                                    " channels, image has " + std::to_string(image.size()));
        }
    }
}

} // namespace detail

/// o_i(x) = -|h(x) - m_i|^2.
inline FeatureStack variance_similarity(const Channels& image, const std::vector<ChannelVector>& means) {
    detail::check_channels(image);
    detail::check_means(image, means);
    const std::size_t h = image.front().height(), w = image.front().width();
    FeatureStack o(means.size(), h, w);
    for (std::size_t i = 0; i < means.size(); ++i) {
        for (std::size_t p = 0; p < h * w; ++p) {
            double d2 = 0.0;
            for (std::size_t ch = 0; ch < image.size(); ++ch) {
                const double d = image[ch][p] - means[i][ch];
                d2 += d * d;
            }
            o[i][p] = -d2;
        }
    }
    return o;
}

/// o_i(x) = -(h(x) - m_i)^T Sigma_i^{-1} (h(x) - m_i), via a Cholesky solve per class.
/// Throws SingularMatrix if a covariance is not symmetric positive definite.
inline FeatureStack mahalanobis_similarity(const Channels& image, const std::vector<ChannelVector>& means,
                                           const std::vector<Eigen::MatrixXd>& covariances) {
    detail::check_channels(image);
    detail::check_means(image, means);
    if (covariances.size() != means.size()) throw DimensionMismatch("mahalanobis: one covariance per class required");
    const std::size_t nch = image.size();
    const std::size_t h = image.front().height(), w = image.front().width();
    FeatureStack o(means.size(), h, w);
    Eigen::VectorXd d(static_cast<Eigen::Index>(nch));
    for (std::size_t i = 0; i < means.size(); ++i) {
        const Eigen::MatrixXd& cov = covariances[i];
        if (cov.rows() != static_cast<Eigen::Index>(nch) || cov.cols() != static_cast<Eigen::Index>(nch)) {
            throw DimensionMismatch("mahalanobis: covariance size does not match channel count");
        }
        if (!cov.isApprox(cov.transpose(), 1e-12)) throw SingularMatrix("mahalanobis: covariance is not symmetric");
        const Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            throw SingularMatrix("mahalanobis: covariance of class " + std::to_string(i) +
                                 " is not positive definite; add a ridge (Sigma + eps I)");
        }
        const bool identity = cov == Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
        for (std::size_t p = 0; p < h * w; ++p) {
            double q = 0.0;
            for (std::size_t ch = 0; ch < nch; ++ch) {
                const double diff = image[ch][p] - means[i][ch];
                d[static_cast<Eigen::Index>(ch)] = diff;
                q += diff * diff;
            }
            // Identity covariance keeps the plain squared distance bit-for-bit.
            if (!identity) q = d.dot(llt.solve(d));
            o[i][p] = -q;
        }
    }
    return o;
}

struct KMeansResult {
    std::vector<ChannelVector> means;
    std::vector<std::size_t> labels;   ///< cluster per pixel, row-major
    std::vector<double> objective;     ///< within-cluster sum of squares after each assignment
};

namespace detail {

inline double sq_dist(const Channels& image, std::size_t p, const ChannelVector& m) {
    double d2 = 0.0;
    for (std::size_t ch = 0; ch < image.size(); ++ch) {
        const double d = image[ch][p] - m[ch];
        d2 += d * d;
    }
    return d2;
}

inline ChannelVector pixel(const Channels& image, std::size_t p) {
    ChannelVector v(image.size());
    for (std::size_t ch = 0; ch < image.size(); ++ch) v[ch] = image[ch][p];
    return v;
}

} // namespace detail

/// Lloyd iterations with k-means++ seeding. Deterministic for a given seed.
/// An empty cluster is re-seeded at the farthest pixel of a cluster with more than one member.
inline KMeansResult kmeans(const Channels& image, std::size_t classes, std::size_t iters, std::uint64_t seed) {
    detail::check_channels(image);
    if (classes < 2) throw InvalidArgument("kmeans: at least two classes required");
    const std::size_t n = image.front().size();
    if (n < classes) throw InvalidArgument("kmeans: fewer pixels than classes");

    std::mt19937_64 rng(seed);
    KMeansResult res;
    res.labels.assign(n, 0);

    // k-means++ seeding; falls back to uniform picks when all distances vanish.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    res.means.push_back(detail::pixel(image, pick(rng)));
    std::vector<double> d2(n);
    while (res.means.size() < classes) {
        double total = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& m : res.means) best = std::min(best, detail::sq_dist(image, p, m));
            d2[p] = best;
            total += best;
        }
        std::size_t chosen = pick(rng);
        if (total > 0.0) {
            std::uniform_real_distribution<double> uni(0.0, total);
            double target = uni(rng);
            for (std::size_t p = 0; p < n; ++p) {
                target -= d2[p];
                if (target <= 0.0 && d2[p] > 0.0) {
                    chosen = p;
                    break;
                }
            }
        }
        res.means.push_back(detail::pixel(image, chosen));
    }

    std::vector<double> cost(n);
    for (std::size_t it = 0; it < std::max<std::size_t>(iters, 1); ++it) {
        bool changed = it == 0;
        for (std::size_t p = 0; p < n; ++p) {
            std::size_t best_k = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < classes; ++k) {
                const double c = detail::sq_dist(image, p, res.means[k]);
                if (c < best) {
                    best = c;
                    best_k = k;
                }
            }
            if (res.labels[p] != best_k) changed = true;
            res.labels[p] = best_k;
            cost[p] = best;
        }

        std::vector<std::size_t> count(classes, 0);
        for (std::size_t p = 0; p < n; ++p) ++count[res.labels[p]];
        for (std::size_t k = 0; k < classes; ++k) {
            if (count[k] != 0) continue;
            // Steal from a cluster that keeps at least one member.
            std::size_t far = n;
            for (std::size_t p = 0; p < n; ++p)
                if (count[res.labels[p]] > 1 && (far == n || cost[p] > cost[far])) far = p;
            --count[res.labels[far]];
            res.labels[far] = k;
            count[k] = 1;
            cost[far] = 0.0;
            res.means[k] = detail::pixel(image, far);
            changed = true;
        }

        double objective = 0.0;
        for (double c : cost) objective += c;
        res.objective.push_back(objective);
        if (!changed) break;

        for (auto& m : res.means) std::fill(m.begin(), m.end(), 0.0);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t ch = 0; ch < image.size(); ++ch) res.means[res.labels[p]][ch] += image[ch][p];
        for (std::size_t k = 0; k < classes; ++k)
            for (double& v : res.means[k]) v /= static_cast<double>(count[k]);
    }
    return res;
}

/// Class means only; see kmeans().
inline std::vector<ChannelVector> kmeans_init(const Channels& image, std::size_t classes, std::size_t iters,
                                              std::uint64_t seed) {
    return kmeans(image, classes, iters, seed).means;
}

/// Per-label sample covariance with ridge * I added; labels index into [0, classes).
inline std::vector<Eigen::MatrixXd> class_covariances(const Channels& image, const std::vector<std::size_t>& labels,
                                                      const std::vector<ChannelVector>& means, double ridge) {
    detail::check_channels(image);
    const std::size_t nch = image.size();
    const auto dim = static_cast<Eigen::Index>(nch);
    std::vector<Eigen::MatrixXd> cov(means.size(), Eigen::MatrixXd::Zero(dim, dim));
    std::vector<std::size_t> count(means.size(), 0);
    Eigen::VectorXd d(dim);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const std::size_t k = labels[p];
        for (std::size_t ch = 0; ch < nch; ++ch) d[static_cast<Eigen::Index>(ch)] = image[ch][p] - means[k][ch];
        cov[k] += d * d.transpose();
        ++count[k];
    }
    for (std::size_t k = 0; k < means.size(); ++k) {
        if (count[k] > 0) cov[k] /= static_cast<double>(count[k]);
        cov[k] += ridge * Eigen::MatrixXd::Identity(dim, dim);
    }
    return cov;
}

} // namespace esp
