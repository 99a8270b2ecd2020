#include "mmwg/readout.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mmwg {

double ConfusionMatrix::condition_number() const {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
    const double smin = svd.singularValues()(2);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return svd.singularValues()(0) / smin;
}

Eigen::Vector3d apply_confusion(const ConfusionMatrix& m,
                                const Eigen::Vector3d& p_true) {
    if (p_true.minCoeff() < 0.0 || std::abs(p_true.sum() - 1.0) > 1e-6)
        throw DomainError("apply_confusion: input is not a distribution");
    return m.m * p_true;
}

InversionResult invert_confusion(const ConfusionMatrix& m,
                                 const Eigen::Vector3d& p_assigned) {
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m.m);
    if (!lu.isInvertible())
        throw SingularMatrix("invert_confusion: confusion matrix is singular");
    InversionResult r;
    r.populations = lu.solve(p_assigned);
    r.has_negative = r.populations.minCoeff() < 0.0;
    return r;
}

double assignment_fidelity(const ConfusionMatrix& m) {
    return m.m.trace() / 3.0;
}

ShotCloud synthesize_shots(const CloudSpec& spec,
                           const std::array<int, 3>& counts,
                           std::uint64_t seed) {
    Eigen::LLT<Eigen::Matrix4d> llt(spec.covariance);
    if (llt.info() != Eigen::Success)
        throw DomainError("synthesize_shots: covariance is not SPD");
    const Eigen::Matrix4d chol = llt.matrixL();

    ShotCloud cloud;
    cloud.class_means = spec.means;
    cloud.class_covariance = spec.covariance;
    for (int j = 0; j < 3; ++j) {
        // independent per-class stream
        std::mt19937_64 rng(seed ^
                            (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(j + 1)));
        std::normal_distribution<double> n(0.0, 1.0);
        for (int k = 0; k < counts[static_cast<size_t>(j)]; ++k) {
            Eigen::Vector4d z;
            for (int d = 0; d < 4; ++d) z(d) = n(rng);
            cloud.points.push_back(spec.means[static_cast<size_t>(j)] +
                                   chol * z);
            cloud.labels.push_back(j);
        }
    }
    return cloud;
}

std::array<double, 3> LinearDiscriminant::scores(
    const Eigen::Vector4d& u) const {
    std::array<double, 3> s{};
    for (int j = 0; j < 3; ++j) {
        const Eigen::Vector4d w = sigma_inv * means[static_cast<size_t>(j)];
        s[static_cast<size_t>(j)] =
            u.dot(w) - 0.5 * means[static_cast<size_t>(j)].dot(w) +
            log_priors[static_cast<size_t>(j)];
    }
    return s;
}

std::array<double, 3> LinearDiscriminant::posteriors(
    const Eigen::Vector4d& u) const {
    auto s = scores(u);
    const double smax = std::max({s[0], s[1], s[2]});
    double z = 0.0;
    for (double& v : s) {
        v = std::exp(v - smax);
        z += v;
    }
    for (double& v : s) v /= z;
    return s;
}

int LinearDiscriminant::classify(const Eigen::Vector4d& u) const {
    const auto s = scores(u);
    return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

LinearDiscriminant linear_discriminant(const ShotCloud& cloud,
                                       const std::array<double, 3>& priors) {
    Eigen::LLT<Eigen::Matrix4d> llt(cloud.class_covariance);
    if (llt.info() != Eigen::Success)
        throw SingularMatrix("linear_discriminant: covariance is not SPD");
    LinearDiscriminant lda;
    lda.means = cloud.class_means;
    lda.sigma_inv = llt.solve(Eigen::Matrix4d::Identity());
    for (int j = 0; j < 3; ++j) {
        if (priors[static_cast<size_t>(j)] <= 0.0)
            throw DomainError("linear_discriminant: priors must be positive");
        lda.log_priors[static_cast<size_t>(j)] =
            std::log(priors[static_cast<size_t>(j)]);
    }
    return lda;
}

ConfusionMatrix estimate_confusion(const ShotCloud& cloud,
                                   const LinearDiscriminant& lda) {
    Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();
    for (size_t k = 0; k < cloud.points.size(); ++k)
        counts(lda.classify(cloud.points[k]), cloud.labels[k]) += 1.0;
    ConfusionMatrix m;
    for (int j = 0; j < 3; ++j) {
        const double tot = counts.col(j).sum();
        if (tot == 0.0)
            throw DomainError("estimate_confusion: no shots for one class");
        m.m.col(j) = counts.col(j) / tot;
    }
    return m;
}

HeraldRule herald_threshold(double target_confidence) {
    if (target_confidence <= 0.5 || target_confidence >= 1.0)
        throw DomainError("herald_threshold: target must be in (0.5, 1)");
    return HeraldRule{target_confidence};
}

bool HeraldRule::accepts(const LinearDiscriminant& lda,
                         const Eigen::Vector4d& u) const {
    return lda.posteriors(u)[0] >= target_confidence;
}

HeraldReport herald_evaluate(const LinearDiscriminant& lda,
                             const ShotCloud& cloud, const HeraldRule& rule) {
    if (cloud.points.empty())
        throw DomainError("herald_evaluate: empty cloud");
    std::size_t accepted = 0, wrong = 0;
    for (size_t k = 0; k < cloud.points.size(); ++k) {
        if (!rule.accepts(lda, cloud.points[k])) continue;
        ++accepted;
        if (cloud.labels[k] != 0) ++wrong;
    }
    HeraldReport r;
    r.acceptance_fraction =
        static_cast<double>(accepted) / static_cast<double>(cloud.points.size());
    r.post_selection_error =
        accepted == 0 ? 0.0
                      : static_cast<double>(wrong) / static_cast<double>(accepted);
    return r;
}

}  // namespace mmwg
