#include "sgqa/features.hpp"

#include <cmath>

namespace sgqa {

FeatureSynthesizer::FeatureSynthesizer(const Ontology& ontology, int feature_dim,
                                       uint64_t seed) {
    if (feature_dim < 8) {
        throw ConfigError("feature_dim must be >= 8, got " + std::to_string(feature_dim));
    }
    int slot = 0;
    for (const auto& cls : ontology.classes) class_slots_[cls] = slot++;
    for (const auto& [cat, values] : ontology.attribute_categories) {
        for (const auto& v : values) attribute_slots_[{cat, v}] = slot++;
    }

    Rng rng(derive_seed(seed, "roi-projection"));
    double scale = 1.0 / std::sqrt(static_cast<double>(slot));
    projection_.resize(feature_dim, slot);
    for (int r = 0; r < feature_dim; ++r) {
        for (int c = 0; c < slot; ++c) {
            projection_(r, c) = rng.normal(0.0, scale);
        }
    }
}

Eigen::VectorXd FeatureSynthesizer::onehot(const SceneObject& obj) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(onehot_dim());
    auto cls = class_slots_.find(obj.class_name);
    if (cls != class_slots_.end()) v[cls->second] = 1.0;
    for (const auto& [cat, value] : obj.attributes) {
        auto slot = attribute_slots_.find({cat, value});
        if (slot != attribute_slots_.end()) v[slot->second] = 1.0;
    }
    return v;
}

Eigen::VectorXd FeatureSynthesizer::features(const SceneObject& obj, double noise_scale,
                                             uint64_t noise_seed) const {
    Eigen::VectorXd r = projection_ * onehot(obj);
    if (noise_scale > 0.0) {
        std::string content_key = obj.class_name;
        for (const auto& [cat, value] : obj.attributes) {
            content_key += '\x1f';
            content_key += cat;
            content_key += '=';
            content_key += value;
        }
        Rng noise(derive_seed(noise_seed, content_key));
        for (int i = 0; i < r.size(); ++i) r[i] += noise.normal(0.0, noise_scale);
    }
    return r;
}

Eigen::VectorXd FeatureSynthesizer::position_feature(const BoundingBox& box) {
    Eigen::VectorXd p(5);
    p << box.x, box.y, box.x + box.w, box.y + box.h, box.area();
    return p;
}

}  // namespace sgqa
