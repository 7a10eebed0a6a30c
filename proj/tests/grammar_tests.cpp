#include <algorithm>
#include <set>

#include <doctest.h>

#include "sgqa/grammar.hpp"

using namespace sgqa;

namespace {

std::vector<SceneGraph> sample_graphs(int count, uint64_t seed) {
    const Ontology ontology = Ontology::default_toy();
    std::vector<SceneGraph> graphs;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        const int n = 2 + static_cast<int>(rng.uniform_index(5));
        graphs.push_back(generate_scene(ontology, n, rng.next_u64()));
        graphs.back().image_id = "g" + std::to_string(i);
    }
    return graphs;
}

std::string corpus_dump(const Corpus& corpus) {
    std::string dump;
    for (const auto* split : {&corpus.train, &corpus.val, &corpus.test})
        for (const auto& pair : *split) dump += qa_to_json(pair).dump() + "\n";
    return dump;
}

}  // namespace

TEST_CASE("generated corpus is split 80/10/10 with disjoint graph ids") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const auto graphs = sample_graphs(30, 7);
    const Corpus corpus = generate_corpus(QuestionGrammar::default_grammar(), graphs,
                                          300, 11, ontology, catalog);
    CHECK(corpus.train.size() == 240);
    CHECK(corpus.val.size() == 30);
    CHECK(corpus.test.size() == 30);

    std::set<std::string> train_ids, val_ids, test_ids;
    for (const auto& p : corpus.train) train_ids.insert(p.graph_id);
    for (const auto& p : corpus.val) val_ids.insert(p.graph_id);
    for (const auto& p : corpus.test) test_ids.insert(p.graph_id);
    for (const auto& id : val_ids) CHECK(train_ids.count(id) == 0);
    for (const auto& id : test_ids) {
        CHECK(train_ids.count(id) == 0);
        CHECK(val_ids.count(id) == 0);
    }
}

TEST_CASE("every corpus pair validates, executes cleanly, and answers match") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const auto graphs = sample_graphs(20, 3);
    std::map<std::string, const SceneGraph*> by_id;
    for (const auto& g : graphs) by_id[g.image_id] = &g;

    const Corpus corpus = generate_corpus(QuestionGrammar::default_grammar(), graphs,
                                          400, 5, ontology, catalog);
    REQUIRE(corpus.size() == 400);
    for (const auto* split : {&corpus.train, &corpus.val, &corpus.test}) {
        for (const auto& pair : *split) {
            CHECK(is_valid(pair.program, catalog));
            CHECK(pair.question.size() <= size_t(kMaxQuestionTokens));
            CHECK(!pair.question.empty());
            const auto result =
                execute(pair.program, *by_id.at(pair.graph_id), catalog, Policy::Strict);
            REQUIRE(result.ok());
            CHECK(result.trace->flags.empty());
            CHECK(answer_of(*result.trace) == pair.answer);
        }
    }
}

TEST_CASE("a large corpus exercises every catalog operation") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const auto graphs = sample_graphs(25, 19);
    const Corpus corpus = generate_corpus(QuestionGrammar::default_grammar(), graphs,
                                          600, 23, ontology, catalog);
    std::set<std::string> ops_seen;
    std::set<std::string> answers;
    for (const auto& pair : corpus.train) {
        for (const auto& call : pair.program.functions) ops_seen.insert(call.operation);
        answers.insert(pair.answer);
    }
    for (const std::string op : {"select", "filter", "relate", "verify", "query",
                                 "exist", "and", "or", "choose", "same", "different",
                                 "common"})
        CHECK_MESSAGE(ops_seen.count(op) == 1, "missing operation ", op);
    CHECK(answers.count("yes") == 1);
    CHECK(answers.count("no") == 1);
    CHECK(answers.size() > 4);
}

TEST_CASE("corpus generation is deterministic by seed") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const auto graphs = sample_graphs(12, 2);
    const auto grammar = QuestionGrammar::default_grammar();
    const Corpus a = generate_corpus(grammar, graphs, 120, 77, ontology, catalog);
    const Corpus b = generate_corpus(grammar, graphs, 120, 77, ontology, catalog);
    const Corpus c = generate_corpus(grammar, graphs, 120, 78, ontology, catalog);
    CHECK(corpus_dump(a) == corpus_dump(b));
    CHECK(corpus_dump(a) != corpus_dump(c));
}

TEST_CASE("corpus records survive the json round trip") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const auto graphs = sample_graphs(8, 31);
    const Corpus corpus = generate_corpus(QuestionGrammar::default_grammar(), graphs,
                                          50, 13, ontology, catalog);
    for (const auto& pair : corpus.train) {
        const QAPair back = qa_from_json(qa_to_json(pair), catalog);
        CHECK(back.question == pair.question);
        CHECK(back.program == pair.program);
        CHECK(back.answer == pair.answer);
        CHECK(back.graph_id == pair.graph_id);
    }
}

TEST_CASE("generation failure modes raise typed errors") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const auto graphs = sample_graphs(6, 41);
    const auto grammar = QuestionGrammar::default_grammar();

    CHECK_THROWS_AS(generate_corpus(grammar, {}, 10, 1, ontology, catalog), EmptyInput);
    CHECK_THROWS_AS(generate_corpus(grammar, graphs, 0, 1, ontology, catalog),
                    ConfigError);

    QuestionGrammar hopeless;
    hopeless.add({"never", [](Rng&, const SceneGraph&, const Ontology&)
                               -> std::optional<QuestionGrammar::Draft> {
                      return std::nullopt;
                  }});
    CHECK_THROWS_AS(generate_corpus(hopeless, graphs, 5, 1, ontology, catalog),
                    ExhaustedTemplates);
}

TEST_CASE("the skeleton for a bare existence question is select then exist") {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    SceneGraph graph = generate_scene(ontology, 3, 5);
    const auto grammar = QuestionGrammar::default_grammar();
    const auto& tpl = grammar.templates().front();
    REQUIRE(tpl.name == "exist_class");
    Rng rng(9);
    const auto d = tpl.instantiate(rng, graph, ontology);
    REQUIRE(d.has_value());
    REQUIRE(d->program.functions.size() == 2);
    CHECK(d->program.functions[0].operation == "select");
    CHECK(d->program.functions[1].operation == "exist");
    CHECK(d->program.functions[1].dependencies == std::vector<int>{0});
    CHECK(d->question.front() == "is");
    CHECK(d->question.back() == "?");
}
