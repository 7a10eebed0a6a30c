#include "doctest.h"

#include "generators.hpp"
#include "oracle.hpp"
#include "sgqa/executor.hpp"

using namespace sgqa;

namespace {

const Catalog& catalog() {
    static const Catalog c = Catalog::core();
    return c;
}

SceneObject obj(std::string id, std::string cls, std::map<std::string, std::string> attrs,
                BoundingBox box) {
    SceneObject o;
    o.id = std::move(id);
    o.class_name = std::move(cls);
    o.attributes = std::move(attrs);
    o.box = box;
    return o;
}

// Two birds (one left, one right), a chair, and a tree, with a couple of
// explicit relation edges.
SceneGraph fixture() {
    SceneGraph g;
    g.image_id = "fixture";
    g.objects["o1"] = obj("o1", "bird", {{"color", "red"}, {"size", "small"}},
                          {0.05, 0.4, 0.1, 0.1});
    g.objects["o2"] = obj("o2", "chair", {{"color", "red"}, {"material", "wood"}},
                          {0.45, 0.45, 0.1, 0.1});
    g.objects["o3"] = obj("o3", "tree", {{"color", "green"}, {"size", "large"}},
                          {0.7, 0.2, 0.2, 0.6});
    g.objects["o4"] = obj("o4", "bird", {{"color", "blue"}, {"size", "small"}},
                          {0.85, 0.05, 0.1, 0.1});
    g.edges.push_back({"o1", "to the left of", "o2"});
    g.edges.push_back({"o2", "to the right of", "o1"});
    g.edges.push_back({"o4", "above", "o3"});
    g.edges.push_back({"o3", "below", "o4"});
    return g;
}

Trace run(const std::string& text, Policy policy = Policy::Lenient) {
    const ExecResult r = execute(parse_program_text(text, catalog()), fixture(),
                                 catalog(), policy);
    REQUIRE(r.ok());
    return *r.trace;
}

}  // namespace

TEST_CASE("select gathers all class members, sorted by id") {
    const Program p = parse_program_text("Select: bird\nExist: [0]", catalog());
    const ExecResult r = execute(p, fixture(), catalog(), Policy::Strict);
    REQUIRE(r.ok());
    CHECK(r.trace->steps[0].output.as_objects() == std::vector<ObjectId>{"o1", "o4"});
    CHECK(r.trace->final.as_bool());
}

TEST_CASE("select scene covers everything, absent class is empty") {
    const Trace all = run("Select: scene\nExist: [0]");
    CHECK(all.steps[0].output.as_objects().size() == 4);
    const Trace none = run("Select: penguin\nExist: [0]");
    CHECK(none.steps[0].output.as_objects().empty());
    CHECK(answer_of(none) == "no");
}

TEST_CASE("spatial filter keeps the left bird only") {
    const Trace t = run("Select: bird\nFilter hposition: left, [0]\nExist: [1]");
    CHECK(t.steps[1].output.as_objects() == std::vector<ObjectId>{"o1"});
    REQUIRE(t.steps[1].attention.size() == 1);
    CHECK(t.steps[1].attention[0].id == "o1");
}

TEST_CASE("negated filter complements within the candidate set") {
    const Trace t = run("Select: bird\nFilter not(color): red, [0]\nExist: [1]");
    CHECK(t.steps[1].output.as_objects() == std::vector<ObjectId>{"o4"});
}

TEST_CASE("relate respects direction") {
    // Who is to the left of the chair: subject position in the edge.
    const Trace s = run("Select: chair\nRelate: _, to the left of, [0]\nExist: [1]");
    CHECK(s.steps[1].output.as_objects() == std::vector<ObjectId>{"o1"});

    // Object direction: anchors take subject position, so this finds the
    // tree that some bird is above (edge o4 -> above -> o3).
    const Program p = parse_program_text(
        "Select: bird\nRelate: tree, above, (o), [0]\nExist: [1]", catalog());
    const ExecResult r = execute(p, fixture(), catalog(), Policy::Lenient);
    REQUIRE(r.ok());
    CHECK(r.trace->steps[1].output.as_objects() == std::vector<ObjectId>{"o3"});

    const Program q = parse_program_text(
        "Select: tree\nRelate: bird, above, [0]\nExist: [1]", catalog());
    const ExecResult r2 = execute(q, fixture(), catalog(), Policy::Lenient);
    REQUIRE(r2.ok());
    CHECK(r2.trace->steps[1].output.as_objects() == std::vector<ObjectId>{"o4"});
}

TEST_CASE("verify, query, choose read the head object") {
    CHECK(answer_of(run("Select: chair\nVerify color: red, [0]")) == "yes");
    CHECK(answer_of(run("Select: bird\nVerify color: red, [0]")) == "no");
    CHECK(answer_of(run("Select: tree\nQuery color: [0]")) == "green");
    CHECK(answer_of(run("Select: tree\nQuery name: [0]")) == "tree");
    CHECK(answer_of(run("Select: chair\nChoose color: red, blue, [0]")) == "red");
    CHECK(answer_of(run("Select: bird\nQuery color: [0]")) == "red");  // head = o1
}

TEST_CASE("boolean connectives and truth mapping") {
    CHECK(answer_of(run("Select: bird\nExist: [0]\nSelect: penguin\nExist: [2]\nAnd: [1], [3]")) ==
          "no");
    CHECK(answer_of(run("Select: bird\nExist: [0]\nSelect: penguin\nExist: [2]\nOr: [1], [3]")) ==
          "yes");
}

TEST_CASE("same, different, and common compare attribute values") {
    CHECK(answer_of(run("Select: bird\nSelect: chair\nSame color: [0], [1]")) == "no");
    CHECK(answer_of(run("Select: chair\nSelect: tree\nDifferent color: [0], [1]")) == "yes");
    // o1 (red bird) and o2 (red chair) share color only.
    SceneGraph g = fixture();
    Program p = parse_program_text("Select: bird\nFilter color: red, [0]\nSelect: chair\nCommon: [1], [2]",
                                   catalog());
    const ExecResult r = execute(p, g, catalog(), Policy::Strict);
    REQUIRE(r.ok());
    CHECK(answer_of(*r.trace) == "color");
}

TEST_CASE("strict policy aborts on empty reference, lenient recovers with a flag") {
    const Program p = parse_program_text("Select: penguin\nQuery color: [0]", catalog());
    const ExecResult strict = execute(p, fixture(), catalog(), Policy::Strict);
    REQUIRE_FALSE(strict.ok());
    CHECK(strict.error->kind == ExecErrorKind::EmptyReference);
    CHECK(strict.error->step == 1);

    const ExecResult lenient = execute(p, fixture(), catalog(), Policy::Lenient);
    REQUIRE(lenient.ok());
    CHECK(answer_of(*lenient.trace) == "unknown");
    CHECK(lenient.trace->flags.size() == 1);
}

TEST_CASE("unknown relation and missing attribute are typed failures") {
    const Program p =
        parse_program_text("Select: bird\nRelate: _, behind, [0]\nExist: [1]", catalog());
    const ExecResult r = execute(p, fixture(), catalog(), Policy::Strict);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error->kind == ExecErrorKind::UnknownRelation);

    const Program q = parse_program_text("Select: chair\nQuery size: [0]", catalog());
    const ExecResult r2 = execute(q, fixture(), catalog(), Policy::Strict);
    REQUIRE_FALSE(r2.ok());
    CHECK(r2.error->kind == ExecErrorKind::UnknownAttributeCategory);
}

TEST_CASE("execute refuses an unvalidated program") {
    Program p = parse_program_text("Select: bird\nExist: [0]", catalog());
    p.functions.pop_back();
    CHECK_THROWS_AS(execute(p, fixture(), catalog(), Policy::Lenient), TypeMismatch);
}

TEST_CASE("boolean and string steps inherit the latest object ancestor's attention") {
    const Trace t = run("Select: bird\nFilter color: red, [0]\nVerify size: small, [1]");
    REQUIRE(t.steps[2].attention.size() == 1);
    CHECK(t.steps[2].attention[0].id == "o1");

    const Trace branched =
        run("Select: bird\nExist: [0]\nSelect: chair\nExist: [2]\nOr: [1], [3]");
    // The or-step ancestor set is {0,1,2,3}; the latest object producer is 2.
    REQUIRE(branched.steps[4].attention.size() == 1);
    CHECK(branched.steps[4].attention[0].id == "o2");
    CHECK(branched.steps[1].attention.size() == 2);  // exist mirrors select bird
}

TEST_CASE("object steps attend exactly their own output") {
    Rng rng(410);
    const Ontology ontology = Ontology::default_toy();
    for (int i = 0; i < 100; ++i) {
        const SceneGraph g = sgqa::testing::random_graph(rng, ontology, 8);
        const Program p = sgqa::testing::random_program(rng, ontology, 6);
        const ExecResult r = execute(p, g, catalog(), Policy::Lenient);
        REQUIRE(r.ok());
        for (const StepRecord& step : r.trace->steps) {
            if (!step.output.is_objects()) continue;
            REQUIRE(step.attention.size() == step.output.as_objects().size());
            for (size_t k = 0; k < step.attention.size(); ++k)
                CHECK(step.attention[k].id == step.output.as_objects()[k]);
        }
    }
}

TEST_CASE("filter and relate outputs stay inside their candidate universe") {
    Rng rng(411);
    const Ontology ontology = Ontology::default_toy();
    for (int i = 0; i < 200; ++i) {
        const SceneGraph g = sgqa::testing::random_graph(rng, ontology, 8);
        const Program p = sgqa::testing::random_program(rng, ontology, 6);
        const ExecResult r = execute(p, g, catalog(), Policy::Lenient);
        REQUIRE(r.ok());
        for (const StepRecord& step : r.trace->steps) {
            const FunctionCall& f = p.functions[step.index];
            if (f.operation == "filter") {
                const auto& in = r.trace->steps[f.dependencies[0]].output.as_objects();
                for (const ObjectId& id : step.output.as_objects())
                    CHECK(std::find(in.begin(), in.end(), id) != in.end());
            } else if (f.operation == "relate" && f.arguments[0] != "_" &&
                       !step.output.as_objects().empty()) {
                for (const ObjectId& id : step.output.as_objects())
                    CHECK(g.at(id).class_name == f.arguments[0]);
            }
        }
    }
}

TEST_CASE("traces are byte-identical across repeated runs") {
    const std::string text = "Select: bird\nFilter hposition: left, [0]\nQuery color: [1]";
    CHECK(trace_to_jsonl(run(text)) == trace_to_jsonl(run(text)));
    CHECK_FALSE(trace_pretty(run(text)).empty());
}

TEST_CASE("executor agrees with the brute-force oracle") {
    Rng rng(500);
    const Ontology ontology = Ontology::default_toy();
    for (int i = 0; i < 500; ++i) {
        const SceneGraph g = sgqa::testing::random_graph(rng, ontology, 8);
        const Program p = sgqa::testing::random_program(rng, ontology, 6);
        for (const bool lenient : {true, false}) {
            const ExecResult engine =
                execute(p, g, catalog(), lenient ? Policy::Lenient : Policy::Strict);
            const sgqa::testing::OracleRun oracle =
                sgqa::testing::oracle_execute(p, g, lenient);
            if (engine.ok()) {
                REQUIRE_FALSE(oracle.failed);
                REQUIRE(oracle.steps.size() == engine.trace->steps.size());
                for (size_t s = 0; s < oracle.steps.size(); ++s) {
                    const Value& got = engine.trace->steps[s].output;
                    const sgqa::testing::OracleValue& want = oracle.steps[s];
                    if (got.is_objects()) CHECK(got.as_objects() == want.ids);
                    else if (got.is_bool()) CHECK(got.as_bool() == want.truth);
                    else CHECK(got.as_str() == want.text);
                }
            } else {
                REQUIRE(oracle.failed);
                CHECK(oracle.fail_step == engine.error->step);
                CHECK(oracle.fail_kind == exec_error_kind_name(engine.error->kind));
            }
        }
    }
}
