#include "generators.hpp"

#include <algorithm>

namespace sgqa::testing {
namespace {

std::vector<std::string> as_vector(const std::set<std::string>& s) {
    return {s.begin(), s.end()};
}

std::string random_class(Rng& rng, const Ontology& ontology) {
    // Occasionally a class absent from the graph, "scene", or the wildcard.
    const double roll = rng.uniform();
    if (roll < 0.08) return "scene";
    if (roll < 0.12) return "penguin";
    return rng.pick(as_vector(ontology.classes));
}

std::pair<std::string, std::string> random_category_value(Rng& rng, const Ontology& ontology) {
    std::vector<std::string> categories = ontology.category_names();
    categories.push_back("hposition");
    categories.push_back("vposition");
    const std::string category = rng.pick(categories);
    std::vector<std::string> values;
    if (category == "hposition") values = {"left", "middle", "right"};
    else if (category == "vposition") values = {"top", "middle", "bottom"};
    else values = as_vector(ontology.attribute_categories.at(category));
    std::string value = rng.pick(values);
    if (rng.uniform() < 0.10) {
        // Mismatched value from another category exercises empty results.
        const std::string other = rng.pick(ontology.category_names());
        value = rng.pick(as_vector(ontology.attribute_categories.at(other)));
    }
    return {category, value};
}

FunctionCall make(int index, std::string op, std::string category,
                  std::vector<std::string> args, std::vector<int> deps) {
    FunctionCall f;
    f.index = index;
    f.operation = std::move(op);
    f.category = std::move(category);
    f.arguments = std::move(args);
    f.dependencies = std::move(deps);
    return f;
}

// select followed by up to `budget` filter/relate refinements; returns the
// index of the last object-producing call.
int grow_chain(Rng& rng, const Ontology& ontology, Program* p, int budget) {
    budget = std::max(budget, 0);
    const int start = static_cast<int>(p->functions.size());
    p->functions.push_back(make(start, "select", "", {random_class(rng, ontology)}, {}));
    int last = start;
    const int extra = static_cast<int>(rng.uniform_index(static_cast<size_t>(budget) + 1));
    for (int k = 0; k < extra; ++k) {
        const int idx = static_cast<int>(p->functions.size());
        if (rng.uniform() < 0.6) {
            auto [category, value] = random_category_value(rng, ontology);
            FunctionCall f = make(idx, "filter", category, {value}, {last});
            f.negate = rng.uniform() < 0.2;
            p->functions.push_back(std::move(f));
        } else {
            FunctionCall f = make(idx, "relate", "",
                                  {random_class(rng, ontology),
                                   rng.pick(as_vector(ontology.relations))},
                                  {last});
            if (rng.uniform() < 0.5) f.direction = RelateDirection::Object;
            p->functions.push_back(std::move(f));
        }
        last = idx;
    }
    return last;
}

void finish_boolean(Rng& rng, const Ontology& ontology, Program* p, int producer) {
    const int idx = static_cast<int>(p->functions.size());
    if (rng.uniform() < 0.5) {
        p->functions.push_back(make(idx, "exist", "", {}, {producer}));
    } else {
        auto [category, value] = random_category_value(rng, ontology);
        p->functions.push_back(make(idx, "verify", category, {value}, {producer}));
    }
}

void finish_string(Rng& rng, const Ontology& ontology, Program* p, int producer) {
    const int idx = static_cast<int>(p->functions.size());
    std::vector<std::string> categories = ontology.category_names();
    categories.push_back("name");
    categories.push_back("hposition");
    categories.push_back("vposition");
    const std::string category = rng.pick(categories);
    if (rng.uniform() < 0.35) {
        auto [cat, v1] = random_category_value(rng, ontology);
        const std::string v2 = random_category_value(rng, ontology).second;
        p->functions.push_back(make(idx, "choose", cat, {v1, v2}, {producer}));
    } else {
        p->functions.push_back(make(idx, "query", category, {}, {producer}));
    }
}

}  // namespace

SceneGraph random_graph(Rng& rng, const Ontology& ontology, int max_objects) {
    const int n = 1 + static_cast<int>(rng.uniform_index(static_cast<size_t>(max_objects)));
    return generate_scene(ontology, n, rng.next_u64());
}

Program random_program(Rng& rng, const Ontology& ontology, int max_functions) {
    Program p;
    const double shape = rng.uniform();
    if (shape < 0.5) {
        // Linear chain with a boolean or string sink.
        const int producer = grow_chain(rng, ontology, &p, std::min(max_functions - 2, 3));
        if (rng.uniform() < 0.5) finish_boolean(rng, ontology, &p, producer);
        else finish_string(rng, ontology, &p, producer);
    } else if (shape < 0.75 && max_functions >= 5) {
        // Two boolean branches joined by a connective.
        const int a = grow_chain(rng, ontology, &p, 0);
        finish_boolean(rng, ontology, &p, a);
        const int bool_a = static_cast<int>(p.functions.size()) - 1;
        const int b = grow_chain(rng, ontology, &p, 0);
        finish_boolean(rng, ontology, &p, b);
        const int bool_b = static_cast<int>(p.functions.size()) - 1;
        const int idx = static_cast<int>(p.functions.size());
        p.functions.push_back(make(idx, rng.uniform() < 0.5 ? "and" : "or", "", {},
                                   {bool_a, bool_b}));
    } else if (max_functions >= 3) {
        // Two object chains compared directly.
        const int a = grow_chain(rng, ontology, &p, std::min(max_functions - 5, 1));
        const int b = grow_chain(rng, ontology, &p, std::min(max_functions - 5, 1));
        const int idx = static_cast<int>(p.functions.size());
        const double pick = rng.uniform();
        if (pick < 0.8) {
            const std::string category = random_category_value(rng, ontology).first;
            p.functions.push_back(make(idx, pick < 0.4 ? "same" : "different", category,
                                       {}, {a, b}));
        } else {
            p.functions.push_back(make(idx, "common", "", {}, {a, b}));
        }
    } else {
        const int producer = grow_chain(rng, ontology, &p, 0);
        finish_boolean(rng, ontology, &p, producer);
    }
    return p;
}

}  // namespace sgqa::testing
