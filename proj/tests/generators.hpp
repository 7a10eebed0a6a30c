#pragma once
// Randomized fixtures shared by property and acceptance tests: synthetic
// graphs and catalog-conforming random programs covering every operation,
// including arguments chosen to miss the graph (empty-set paths).

#include "sgqa/program.hpp"
#include "sgqa/rng.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa::testing {

SceneGraph random_graph(Rng& rng, const Ontology& ontology, int max_objects);

// Valid program with at most max_functions calls (>= 3 recommended so the
// two-branch shapes fit). Shapes: linear object chain ending in a boolean or
// string sink, two boolean branches joined by and/or, or two object chains
// joined by same/different/common.
Program random_program(Rng& rng, const Ontology& ontology, int max_functions);

}  // namespace sgqa::testing
