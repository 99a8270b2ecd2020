#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mmwg/common.hpp"

namespace mmwg {

// Column-stochastic assignment matrix: m(i, j) = P(assign i | prepared j).
struct ConfusionMatrix {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

    double condition_number() const;
};

struct InversionResult {
    Eigen::Vector3d populations;
    bool has_negative = false;  // raw inverse can leave the simplex
};

Eigen::Vector3d apply_confusion(const ConfusionMatrix& m,
                                const Eigen::Vector3d& p_true);
InversionResult invert_confusion(const ConfusionMatrix& m,
                                 const Eigen::Vector3d& p_assigned);

// Mean of the diagonal: three-state assignment fidelity.
double assignment_fidelity(const ConfusionMatrix& m);

// Per-state Gaussian cluster model in the (I_R, Q_R, I_T, Q_T) plane.
struct CloudSpec {
    std::array<Eigen::Vector4d, 3> means;
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
};

struct ShotCloud {
    std::vector<Eigen::Vector4d> points;
    std::vector<int> labels;  // prepared state per point
    std::array<Eigen::Vector4d, 3> class_means;
    Eigen::Matrix4d class_covariance;
};

// Draws counts[j] shots for each prepared state j from its Gaussian; each
// class uses an independent RNG stream derived from seed, so per-class draws
// do not depend on the other classes' counts.
ShotCloud synthesize_shots(const CloudSpec& spec,
                           const std::array<int, 3>& counts,
                           std::uint64_t seed);

// Shared-covariance linear discriminant with configurable priors.
struct LinearDiscriminant {
    std::array<Eigen::Vector4d, 3> means;
    Eigen::Matrix4d sigma_inv;
    std::array<double, 3> log_priors;

    std::array<double, 3> scores(const Eigen::Vector4d& u) const;
    std::array<double, 3> posteriors(const Eigen::Vector4d& u) const;
    int classify(const Eigen::Vector4d& u) const;
};

LinearDiscriminant linear_discriminant(
    const ShotCloud& cloud,
    const std::array<double, 3>& priors = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});

// Empirical column-stochastic confusion of the classifier on labeled shots.
ConfusionMatrix estimate_confusion(const ShotCloud& cloud,
                                   const LinearDiscriminant& lda);

// Accept a shot as "g" only when the Gaussian posterior P(g|u) reaches the
// target confidence.
struct HeraldRule {
    double target_confidence = 0.9999;

    bool accepts(const LinearDiscriminant& lda, const Eigen::Vector4d& u) const;
};

HeraldRule herald_threshold(double target_confidence);

struct HeraldReport {
    double acceptance_fraction = 0.0;
    // fraction of accepted shots whose prepared label was not g
    double post_selection_error = 0.0;
};

HeraldReport herald_evaluate(const LinearDiscriminant& lda,
                             const ShotCloud& cloud, const HeraldRule& rule);

}  // namespace mmwg
