#pragma once
// Scene-graph world model: objects with classes, attributes and normalized
// boxes, plus typed relation edges. Covers GQA-format ingestion, a canonical
// byte-stable serialization, synthetic world generation and noise corruption.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgqa/errors.hpp"
#include "sgqa/rng.hpp"

namespace sgqa {

using Json = nlohmann::ordered_json;

using ObjectId = std::string;

struct BoundingBox {
    double x = 0.0;  // left edge, normalized [0,1]
    double y = 0.0;  // top edge, normalized [0,1]
    double w = 0.0;
    double h = 0.0;

    double center_x() const { return x + w / 2.0; }
    double center_y() const { return y + h / 2.0; }
    double area() const { return w * h; }
    bool valid() const {
        return x >= 0.0 && y >= 0.0 && w > 0.0 && h > 0.0 &&
               x + w <= 1.0 + 1e-9 && y + h <= 1.0 + 1e-9;
    }
    bool operator==(const BoundingBox&) const = default;
};

struct SceneObject {
    ObjectId id;
    std::string class_name;
    std::map<std::string, std::string> attributes;  // category -> value
    BoundingBox box;

    bool operator==(const SceneObject&) const = default;
};

struct RelationEdge {
    ObjectId subject_id;
    std::string relation_name;
    ObjectId object_id;

    bool operator==(const RelationEdge&) const = default;
};

struct SceneGraph {
    std::string image_id;
    std::map<ObjectId, SceneObject> objects;  // keyed and iterated by id
    std::vector<RelationEdge> edges;

    std::vector<ObjectId> object_ids() const;
    const SceneObject* find(const ObjectId& id) const;
    const SceneObject& at(const ObjectId& id) const;  // throws UnknownObject
    // Returns false and fills `why` on the first invariant breach.
    bool check_invariants(std::string* why = nullptr) const;

    bool operator==(const SceneGraph&) const = default;
};

struct Ontology {
    std::set<std::string> classes;
    // category -> value set; must include color, material, size, shape
    std::map<std::string, std::set<std::string>> attribute_categories;
    std::set<std::string> relations;
    // class -> category -> plausible values (subset of the category's set)
    std::map<std::string, std::map<std::string, std::set<std::string>>> plausibility_table;

    bool has_class(const std::string& name) const { return classes.count(name) > 0; }
    bool has_category(const std::string& category) const {
        return attribute_categories.count(category) > 0;
    }
    bool plausible(const std::string& class_name, const std::string& category,
                   const std::string& value) const;
    std::vector<std::string> category_names() const;
    // Values a generator may assign: the plausibility row if present and
    // non-empty, otherwise the category's full value set.
    std::vector<std::string> plausible_values(const std::string& class_name,
                                              const std::string& category) const;
    bool check_invariants(std::string* why = nullptr) const;

    Json to_json() const;
    static Ontology from_json(const Json& j);
    // Small built-in world used by tests and the default run config.
    static Ontology default_toy();
};

// Rebuilds a plausibility table from attribute co-occurrence in a graph
// corpus; geometric hposition/vposition values are included per class.
std::map<std::string, std::map<std::string, std::set<std::string>>>
plausibility_from_graphs(const std::vector<SceneGraph>& graphs);

struct NoiseSpec {
    double p_class = 0.0;
    double p_attr = 0.0;
    double p_drop_edge = 0.0;
    double p_drop_obj = 0.0;
    uint64_t seed = 0;

    bool valid() const;
};

struct LoadReport {
    SceneGraph graph;
    int dropped_edges = 0;
    int clamped_boxes = 0;
    std::vector<std::string> unknown_classes;
    std::vector<std::string> unknown_relations;
    std::vector<std::string> unknown_attributes;
};

// GQA-format single-image record: objects keyed by id with name, pixel
// x/y/w/h, attributes list and relations list of {name, object}. Pixel
// coordinates are normalized by the record's width/height. Throws
// MalformedDocument; dangling relations are dropped and counted.
LoadReport load_scene_graph(const Json& document, const std::string& image_id,
                            const Ontology& ontology);

// Canonical engine scene format, field order fixed for byte-stable output.
Json scene_to_json(const SceneGraph& graph);
SceneGraph scene_from_json(const Json& j);

// Synthetic world generation: boxes sampled with pairwise center distance
// > 0.05, spatial edges consistent with box centers, attributes drawn from
// the plausibility table. Deterministic by seed.
SceneGraph generate_scene(const Ontology& ontology, int n_objects, uint64_t seed);

// Independent per-element corruption. Objects listed in `protected_ids`
// are never dropped (class/attribute noise still applies).
SceneGraph corrupt(const SceneGraph& graph, const NoiseSpec& spec,
                   const std::set<ObjectId>& protected_ids = {});

inline constexpr const char* kRelLeftOf = "to the left of";
inline constexpr const char* kRelRightOf = "to the right of";
inline constexpr const char* kRelAbove = "above";
inline constexpr const char* kRelBelow = "below";

inline constexpr const char* kCatHPosition = "hposition";
inline constexpr const char* kCatVPosition = "vposition";

bool is_position_category(const std::string& category);

// Thirds of the image by box center: hposition left/middle/right,
// vposition top/middle/bottom. Throws UnknownObject.
bool spatial_predicate(const SceneGraph& graph, const ObjectId& id,
                       const std::string& category, const std::string& value);

// The value of a position category for an object ("left", "middle", ...).
std::string position_value(const BoundingBox& box, const std::string& category);

}  // namespace sgqa
