#include "sgqa/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sgqa {

std::vector<ObjectId> SceneGraph::object_ids() const {
    std::vector<ObjectId> ids;
    ids.reserve(objects.size());
    for (const auto& [id, obj] : objects) ids.push_back(id);
    return ids;
}

const SceneObject* SceneGraph::find(const ObjectId& id) const {
    auto it = objects.find(id);
    return it == objects.end() ? nullptr : &it->second;
}

const SceneObject& SceneGraph::at(const ObjectId& id) const {
    const SceneObject* obj = find(id);
    if (!obj) throw UnknownObject("no object with id '" + id + "' in " + image_id);
    return *obj;
}

bool SceneGraph::check_invariants(std::string* why) const {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    for (const auto& [id, obj] : objects) {
        if (obj.id != id) return fail("object map key mismatch for '" + id + "'");
        if (!obj.box.valid()) return fail("invalid box on '" + id + "'");
    }
    for (const RelationEdge& e : edges) {
        if (e.subject_id == e.object_id) {
            return fail("self edge on '" + e.subject_id + "'");
        }
        if (!objects.count(e.subject_id) || !objects.count(e.object_id)) {
            return fail("dangling edge " + e.subject_id + " -> " + e.object_id);
        }
    }
    return true;
}

bool Ontology::plausible(const std::string& class_name, const std::string& category,
                         const std::string& value) const {
    auto cls = plausibility_table.find(class_name);
    if (cls == plausibility_table.end()) return false;
    auto cat = cls->second.find(category);
    if (cat == cls->second.end()) return false;
    return cat->second.count(value) > 0;
}

std::vector<std::string> Ontology::category_names() const {
    std::vector<std::string> names;
    for (const auto& [cat, values] : attribute_categories) names.push_back(cat);
    return names;
}

std::vector<std::string> Ontology::plausible_values(const std::string& class_name,
                                                    const std::string& category) const {
    auto cls = plausibility_table.find(class_name);
    if (cls != plausibility_table.end()) {
        auto cat = cls->second.find(category);
        if (cat != cls->second.end() && !cat->second.empty()) {
            return {cat->second.begin(), cat->second.end()};
        }
    }
    auto full = attribute_categories.find(category);
    if (full == attribute_categories.end()) {
        throw UnknownCategory("no attribute category '" + category + "'");
    }
    return {full->second.begin(), full->second.end()};
}

bool Ontology::check_invariants(std::string* why) const {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    for (const auto& [cat, values] : attribute_categories) {
        if (values.count("yes") || values.count("no")) {
            return fail("category '" + cat + "' collides with the yes/no answer pair");
        }
    }
    for (const auto& [cls, cats] : plausibility_table) {
        for (const auto& [cat, values] : cats) {
            auto full = attribute_categories.find(cat);
            if (full == attribute_categories.end()) {
                if (is_position_category(cat)) continue;
                return fail("plausibility row references unknown category '" + cat + "'");
            }
            for (const auto& v : values) {
                if (!full->second.count(v)) {
                    return fail("implausible table value '" + v + "' outside category '" +
                                cat + "'");
                }
            }
        }
    }
    return true;
}

Json Ontology::to_json() const {
    Json j;
    j["classes"] = classes;
    Json cats = Json::object();
    for (const auto& [cat, values] : attribute_categories) cats[cat] = values;
    j["attribute_categories"] = cats;
    j["relations"] = relations;
    Json plaus = Json::object();
    for (const auto& [cls, catmap] : plausibility_table) {
        Json row = Json::object();
        for (const auto& [cat, values] : catmap) row[cat] = values;
        plaus[cls] = row;
    }
    j["plausibility_table"] = plaus;
    return j;
}

Ontology Ontology::from_json(const Json& j) {
    Ontology o;
    try {
        for (const auto& c : j.at("classes")) o.classes.insert(c.get<std::string>());
        for (const auto& [cat, values] : j.at("attribute_categories").items()) {
            for (const auto& v : values) {
                o.attribute_categories[cat].insert(v.get<std::string>());
            }
            o.attribute_categories[cat];  // keep empty categories
        }
        for (const auto& r : j.at("relations")) o.relations.insert(r.get<std::string>());
        if (j.count("plausibility_table")) {
            for (const auto& [cls, catmap] : j.at("plausibility_table").items()) {
                for (const auto& [cat, values] : catmap.items()) {
                    for (const auto& v : values) {
                        o.plausibility_table[cls][cat].insert(v.get<std::string>());
                    }
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedDocument(std::string("ontology: ") + e.what());
    }
    std::string why;
    if (!o.check_invariants(&why)) throw MalformedDocument("ontology: " + why);
    return o;
}

Ontology Ontology::default_toy() {
    Ontology o;
    o.classes = {"bird", "cat", "dog", "chair", "table", "car", "flower", "tree"};
    o.attribute_categories["color"] = {"red",   "blue",  "green", "yellow",
                                       "black", "white", "brown", "gray"};
    o.attribute_categories["material"] = {"wood",    "metal", "plastic", "fabric",
                                          "feather", "fur",   "leaf"};
    o.attribute_categories["size"] = {"small", "medium", "large"};
    o.attribute_categories["shape"] = {"round", "square", "slim", "broad"};
    o.relations = {kRelLeftOf, kRelRightOf, kRelAbove, kRelBelow};

    auto row = [&o](const std::string& cls, std::set<std::string> colors,
                    std::set<std::string> materials, std::set<std::string> sizes,
                    std::set<std::string> shapes) {
        o.plausibility_table[cls]["color"] = std::move(colors);
        o.plausibility_table[cls]["material"] = std::move(materials);
        o.plausibility_table[cls]["size"] = std::move(sizes);
        o.plausibility_table[cls]["shape"] = std::move(shapes);
    };
    row("bird", {"red", "blue", "yellow", "brown", "black", "white"}, {"feather"},
        {"small", "medium"}, {"round", "slim"});
    row("cat", {"black", "white", "brown", "gray"}, {"fur"}, {"small", "medium"},
        {"round", "slim"});
    row("dog", {"black", "white", "brown"}, {"fur"}, {"small", "medium", "large"},
        {"round", "broad", "slim"});
    row("chair", {"red", "blue", "green", "yellow", "black", "white", "brown"},
        {"wood", "metal", "plastic", "fabric"}, {"small", "medium", "large"},
        {"square", "broad"});
    row("table", {"black", "white", "brown", "gray"}, {"wood", "metal", "plastic"},
        {"medium", "large"}, {"square", "round", "broad"});
    row("car", {"red", "blue", "green", "yellow", "black", "white", "gray"}, {"metal"},
        {"medium", "large"}, {"square", "slim", "broad"});
    row("flower", {"red", "blue", "yellow", "white"}, {"leaf"}, {"small"},
        {"round", "slim"});
    row("tree", {"green", "brown"}, {"wood", "leaf"}, {"medium", "large"},
        {"broad", "slim", "round"});
    return o;
}

std::map<std::string, std::map<std::string, std::set<std::string>>>
plausibility_from_graphs(const std::vector<SceneGraph>& graphs) {
    std::map<std::string, std::map<std::string, std::set<std::string>>> table;
    for (const SceneGraph& g : graphs) {
        for (const auto& [id, obj] : g.objects) {
            for (const auto& [cat, value] : obj.attributes) {
                table[obj.class_name][cat].insert(value);
            }
            table[obj.class_name][kCatHPosition].insert(
                position_value(obj.box, kCatHPosition));
            table[obj.class_name][kCatVPosition].insert(
                position_value(obj.box, kCatVPosition));
        }
    }
    return table;
}

bool NoiseSpec::valid() const {
    auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    return in01(p_class) && in01(p_attr) && in01(p_drop_edge) && in01(p_drop_obj);
}

namespace {

double require_number(const Json& j, const char* field, const std::string& ctx) {
    if (!j.count(field) || !j.at(field).is_number()) {
        throw MalformedDocument(ctx + ": missing numeric field '" + field + "'");
    }
    return j.at(field).get<double>();
}

}  // namespace

LoadReport load_scene_graph(const Json& document, const std::string& image_id,
                            const Ontology& ontology) {
    if (!document.is_object()) {
        throw MalformedDocument("scene record for '" + image_id + "' is not an object");
    }
    double width = require_number(document, "width", image_id);
    double height = require_number(document, "height", image_id);
    if (width <= 0 || height <= 0) {
        throw MalformedDocument(image_id + ": non-positive image dimensions");
    }
    if (!document.count("objects") || !document.at("objects").is_object()) {
        throw MalformedDocument(image_id + ": missing required field 'objects'");
    }

    // value -> category reverse lookup for the attributes list
    std::map<std::string, std::string> value_to_category;
    for (const auto& [cat, values] : ontology.attribute_categories) {
        for (const auto& v : values) value_to_category[v] = cat;
    }

    LoadReport report;
    report.graph.image_id = image_id;
    std::set<std::string> seen_unknown_class, seen_unknown_attr, seen_unknown_rel;

    for (const auto& [oid, rec] : document.at("objects").items()) {
        if (!rec.is_object() || !rec.count("name")) {
            throw MalformedDocument(image_id + "/" + oid + ": missing required field 'name'");
        }
        SceneObject obj;
        obj.id = oid;
        obj.class_name = rec.at("name").get<std::string>();
        if (!ontology.has_class(obj.class_name) &&
            seen_unknown_class.insert(obj.class_name).second) {
            report.unknown_classes.push_back(obj.class_name);
        }

        double px = require_number(rec, "x", image_id + "/" + oid);
        double py = require_number(rec, "y", image_id + "/" + oid);
        double pw = require_number(rec, "w", image_id + "/" + oid);
        double ph = require_number(rec, "h", image_id + "/" + oid);
        BoundingBox box{px / width, py / height, pw / width, ph / height};
        // GQA records occasionally carry degenerate or out-of-frame boxes
        bool clamped = false;
        if (box.w <= 0) { box.w = 1.0 / width; clamped = true; }
        if (box.h <= 0) { box.h = 1.0 / height; clamped = true; }
        if (box.x < 0) { box.x = 0; clamped = true; }
        if (box.y < 0) { box.y = 0; clamped = true; }
        if (box.x + box.w > 1.0) {
            if (box.x >= 1.0) { box.x = 1.0 - 1.0 / width; }
            box.w = 1.0 - box.x;
            clamped = true;
        }
        if (box.y + box.h > 1.0) {
            if (box.y >= 1.0) { box.y = 1.0 - 1.0 / height; }
            box.h = 1.0 - box.y;
            clamped = true;
        }
        if (clamped) report.clamped_boxes++;
        obj.box = box;

        if (rec.count("attributes")) {
            for (const auto& a : rec.at("attributes")) {
                std::string value = a.get<std::string>();
                auto it = value_to_category.find(value);
                if (it == value_to_category.end()) {
                    if (seen_unknown_attr.insert(value).second) {
                        report.unknown_attributes.push_back(value);
                    }
                    continue;
                }
                // first value per category wins
                obj.attributes.emplace(it->second, value);
            }
        }
        report.graph.objects.emplace(obj.id, std::move(obj));
    }

    for (const auto& [oid, rec] : document.at("objects").items()) {
        if (!rec.count("relations")) continue;
        for (const auto& rel : rec.at("relations")) {
            if (!rel.is_object() || !rel.count("name") || !rel.count("object")) {
                throw MalformedDocument(image_id + "/" + oid +
                                        ": relation entry missing 'name' or 'object'");
            }
            RelationEdge edge;
            edge.subject_id = oid;
            edge.relation_name = rel.at("name").get<std::string>();
            edge.object_id = rel.at("object").get<std::string>();
            if (!report.graph.objects.count(edge.object_id) ||
                edge.object_id == edge.subject_id) {
                report.dropped_edges++;
                continue;
            }
            if (!ontology.relations.count(edge.relation_name) &&
                seen_unknown_rel.insert(edge.relation_name).second) {
                report.unknown_relations.push_back(edge.relation_name);
            }
            report.graph.edges.push_back(std::move(edge));
        }
    }
    return report;
}

Json scene_to_json(const SceneGraph& graph) {
    Json j;
    j["image_id"] = graph.image_id;
    j["width"] = 1;
    j["height"] = 1;
    Json objs = Json::array();
    for (const auto& [id, obj] : graph.objects) {
        Json o;
        o["id"] = obj.id;
        o["class"] = obj.class_name;
        Json attrs = Json::object();
        for (const auto& [cat, value] : obj.attributes) attrs[cat] = value;
        o["attributes"] = attrs;
        o["box"] = Json::array({obj.box.x, obj.box.y, obj.box.w, obj.box.h});
        objs.push_back(std::move(o));
    }
    j["objects"] = std::move(objs);
    Json edges = Json::array();
    for (const RelationEdge& e : graph.edges) {
        edges.push_back(Json::array({e.subject_id, e.relation_name, e.object_id}));
    }
    j["edges"] = std::move(edges);
    return j;
}

SceneGraph scene_from_json(const Json& j) {
    SceneGraph g;
    try {
        g.image_id = j.at("image_id").get<std::string>();
        for (const auto& o : j.at("objects")) {
            SceneObject obj;
            obj.id = o.at("id").get<std::string>();
            obj.class_name = o.at("class").get<std::string>();
            for (const auto& [cat, value] : o.at("attributes").items()) {
                obj.attributes[cat] = value.get<std::string>();
            }
            const auto& box = o.at("box");
            obj.box = BoundingBox{box.at(0).get<double>(), box.at(1).get<double>(),
                                  box.at(2).get<double>(), box.at(3).get<double>()};
            g.objects.emplace(obj.id, std::move(obj));
        }
        for (const auto& e : j.at("edges")) {
            g.edges.push_back(RelationEdge{e.at(0).get<std::string>(),
                                           e.at(1).get<std::string>(),
                                           e.at(2).get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedDocument(std::string("scene: ") + e.what());
    }
    std::string why;
    if (!g.check_invariants(&why)) throw MalformedDocument("scene: " + why);
    return g;
}

SceneGraph generate_scene(const Ontology& ontology, int n_objects, uint64_t seed) {
    if (n_objects < 1) throw PlacementFailure("n_objects must be >= 1");
    std::string why;
    if (!ontology.check_invariants(&why)) throw MalformedDocument("ontology: " + why);

    Rng rng(seed);
    SceneGraph g;
    g.image_id = "synth_" + std::to_string(seed);

    std::vector<std::string> classes(ontology.classes.begin(), ontology.classes.end());
    std::vector<std::string> categories = ontology.category_names();

    constexpr double kMinCenterDist = 0.05;
    constexpr int kMaxAttemptsPerObject = 200;

    std::vector<BoundingBox> placed;
    for (int i = 0; i < n_objects; ++i) {
        BoundingBox box;
        bool ok = false;
        for (int attempt = 0; attempt < kMaxAttemptsPerObject && !ok; ++attempt) {
            box.w = rng.uniform(0.08, 0.22);
            box.h = rng.uniform(0.08, 0.22);
            box.x = rng.uniform(0.0, 1.0 - box.w);
            box.y = rng.uniform(0.0, 1.0 - box.h);
            ok = true;
            for (const BoundingBox& other : placed) {
                double dx = box.center_x() - other.center_x();
                double dy = box.center_y() - other.center_y();
                if (std::sqrt(dx * dx + dy * dy) <= kMinCenterDist) {
                    ok = false;
                    break;
                }
            }
        }
        if (!ok) {
            throw PlacementFailure("could not place object " + std::to_string(i) +
                                   " of " + std::to_string(n_objects) +
                                   " with center spacing " + std::to_string(kMinCenterDist));
        }
        placed.push_back(box);

        SceneObject obj;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "o%03d", i);
        obj.id = buf;
        obj.box = box;
        obj.class_name = rng.pick(classes);
        for (const std::string& cat : categories) {
            std::vector<std::string> values = ontology.plausible_values(obj.class_name, cat);
            obj.attributes[cat] = rng.pick(values);
        }
        g.objects.emplace(obj.id, std::move(obj));
    }

    // spatial edges from box centers, both directions per ordered pair
    std::vector<ObjectId> ids = g.object_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t k = i + 1; k < ids.size(); ++k) {
            const BoundingBox& a = g.objects.at(ids[i]).box;
            const BoundingBox& b = g.objects.at(ids[k]).box;
            if (a.center_x() < b.center_x()) {
                g.edges.push_back({ids[i], kRelLeftOf, ids[k]});
                g.edges.push_back({ids[k], kRelRightOf, ids[i]});
            } else if (b.center_x() < a.center_x()) {
                g.edges.push_back({ids[k], kRelLeftOf, ids[i]});
                g.edges.push_back({ids[i], kRelRightOf, ids[k]});
            }
            if (a.center_y() < b.center_y()) {
                g.edges.push_back({ids[i], kRelAbove, ids[k]});
                g.edges.push_back({ids[k], kRelBelow, ids[i]});
            } else if (b.center_y() < a.center_y()) {
                g.edges.push_back({ids[k], kRelAbove, ids[i]});
                g.edges.push_back({ids[i], kRelBelow, ids[k]});
            }
        }
    }
    return g;
}

SceneGraph corrupt(const SceneGraph& graph, const NoiseSpec& spec,
                   const std::set<ObjectId>& protected_ids) {
    if (!spec.valid()) throw ConfigError("noise probabilities must lie in [0,1]");
    Rng rng(spec.seed);
    SceneGraph out = graph;

    // Pass order is part of the determinism contract: classes, attributes,
    // edge drops, object drops — each in id / list order.
    std::set<std::string> classes;
    std::map<std::string, std::set<std::string>> category_values;
    for (const auto& [id, obj] : graph.objects) {
        classes.insert(obj.class_name);
        for (const auto& [cat, value] : obj.attributes) category_values[cat].insert(value);
    }

    for (auto& [id, obj] : out.objects) {
        if (rng.uniform() < spec.p_class) {
            std::vector<std::string> candidates;
            for (const auto& c : classes) {
                if (c != obj.class_name) candidates.push_back(c);
            }
            if (!candidates.empty()) obj.class_name = rng.pick(candidates);
        }
    }
    for (auto& [id, obj] : out.objects) {
        for (auto& [cat, value] : obj.attributes) {
            if (rng.uniform() < spec.p_attr) {
                std::vector<std::string> candidates;
                for (const auto& v : category_values[cat]) {
                    if (v != value) candidates.push_back(v);
                }
                if (!candidates.empty()) value = rng.pick(candidates);
            }
        }
    }

    std::vector<RelationEdge> kept;
    for (const RelationEdge& e : out.edges) {
        if (rng.uniform() < spec.p_drop_edge) continue;
        kept.push_back(e);
    }
    out.edges = std::move(kept);

    std::vector<ObjectId> to_drop;
    for (const auto& [id, obj] : out.objects) {
        if (protected_ids.count(id)) continue;
        if (rng.uniform() < spec.p_drop_obj) to_drop.push_back(id);
    }
    for (const ObjectId& id : to_drop) {
        out.objects.erase(id);
        std::erase_if(out.edges, [&](const RelationEdge& e) {
            return e.subject_id == id || e.object_id == id;
        });
    }
    return out;
}

bool is_position_category(const std::string& category) {
    return category == kCatHPosition || category == kCatVPosition;
}

std::string position_value(const BoundingBox& box, const std::string& category) {
    if (category == kCatHPosition) {
        double cx = box.center_x();
        if (cx < 1.0 / 3.0) return "left";
        if (cx > 2.0 / 3.0) return "right";
        return "middle";
    }
    if (category == kCatVPosition) {
        double cy = box.center_y();
        if (cy < 1.0 / 3.0) return "top";
        if (cy > 2.0 / 3.0) return "bottom";
        return "middle";
    }
    throw UnknownCategory("'" + category + "' is not a position category");
}

bool spatial_predicate(const SceneGraph& graph, const ObjectId& id,
                       const std::string& category, const std::string& value) {
    const SceneObject& obj = graph.at(id);
    return position_value(obj.box, category) == value;
}

}  // namespace sgqa
