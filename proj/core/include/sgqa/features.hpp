#pragma once
// Synthetic region features: a fixed seed-derived random projection of an
// object's symbolic content (class + attribute one-hots) plus Gaussian
// noise. Stands in for CNN region features at desk scale.

#include <Eigen/Dense>

#include "sgqa/scene_graph.hpp"

namespace sgqa {

class FeatureSynthesizer {
public:
    // feature_dim must be >= 8. The projection is derived from (ontology
    // layout, feature_dim, seed) and shared across a run.
    FeatureSynthesizer(const Ontology& ontology, int feature_dim, uint64_t seed);

    // r = P * onehot(class ++ attributes) + eps, eps ~ N(0, noise_scale^2).
    // The noise stream is keyed by (noise_seed, object content), so features
    // are a pure function of content and seeds.
    Eigen::VectorXd features(const SceneObject& obj, double noise_scale,
                             uint64_t noise_seed) const;

    Eigen::VectorXd onehot(const SceneObject& obj) const;
    const Eigen::MatrixXd& projection() const { return projection_; }
    int feature_dim() const { return static_cast<int>(projection_.rows()); }
    int onehot_dim() const { return static_cast<int>(projection_.cols()); }

    // (x1, y1, x2, y2, area) of the normalized box.
    static Eigen::VectorXd position_feature(const BoundingBox& box);

private:
    std::map<std::string, int> class_slots_;
    // (category, value) -> slot index past the class block
    std::map<std::pair<std::string, std::string>, int> attribute_slots_;
    Eigen::MatrixXd projection_;
};

}  // namespace sgqa
