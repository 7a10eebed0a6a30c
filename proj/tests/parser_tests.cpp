#include <cmath>

#include <doctest.h>

#include "sgqa/parser_model.hpp"

using namespace sgqa;

namespace {

QAPair make_pair(const std::string& question, const std::string& program_text) {
    QAPair pair;
    pair.question = tokenize(question);
    pair.program = parse_program_text(program_text, Catalog::core());
    pair.graph_id = "g0";
    return pair;
}

std::vector<QAPair> tiny_corpus() {
    return {
        make_pair("is there a bird ?", "Select: bird\nExist: [0]"),
        make_pair("what color is the chair ?", "Select: chair\nQuery color: [0]"),
        make_pair("is the car red or blue ?", "Select: car\nChoose color: red, blue, [0]"),
        make_pair("what is to the left of the tree ?",
                  "Select: tree\nRelate: _, to the left of, [0]\nQuery name: [1]"),
    };
}

ParserConfig tiny_config() {
    ParserConfig c = ParserConfig::toy();
    c.word_dim = 8;
    c.hidden_dim = 8;
    c.layers = 2;
    c.batch_size = 2;
    return c;
}

}  // namespace

TEST_CASE("vocabulary carries sentinels, fine operations, and whole arguments") {
    const auto corpus = tiny_corpus();
    const ParserVocab vocab = ParserVocab::build(corpus);

    CHECK(vocab.words[0] == ParserVocab::kUnk);
    CHECK(vocab.ops[0] == ParserVocab::kStart);
    CHECK(vocab.ops[1] == ParserVocab::kEnd);
    CHECK(vocab.args[0] == ParserVocab::kStart);
    CHECK(vocab.args[1] == ParserVocab::kEnd);

    CHECK(vocab.op_id("select") >= 2);
    CHECK(vocab.op_id("query color") >= 2);
    CHECK(vocab.op_id("query name") >= 2);
    CHECK(vocab.op_id("relate") >= 2);
    CHECK(vocab.op_id("never seen") == -1);

    CHECK(vocab.arg_id("red, blue") >= 2);
    CHECK(vocab.arg_id("_, to the left of") >= 2);
    CHECK(vocab.arg_id("") >= 2);

    CHECK(vocab.word_id("bird") > 0);
    CHECK(vocab.word_id("zeppelin") == 0);

    const ParserVocab back = ParserVocab::from_json(vocab.to_json());
    CHECK(back.words == vocab.words);
    CHECK(back.ops == vocab.ops);
    CHECK(back.args == vocab.args);
    CHECK(back.op_id("select") == vocab.op_id("select"));
}

TEST_CASE("operation tokens encode negation and relate direction") {
    const Catalog catalog = Catalog::core();
    const Program negated =
        parse_program_text("Select: bird\nFilter not(color): red [0]\nExist: [1]", catalog);
    CHECK(ParserVocab::op_token(negated.functions[1]) == "filter not(color)");

    const Program directed = parse_program_text(
        "Select: bird\nRelate: tree, above, (o), [0]\nExist: [1]", catalog);
    CHECK(ParserVocab::op_token(directed.functions[1]) == "relate (o)");
    CHECK(ParserVocab::arg_token(directed.functions[1]) == "tree, above");
}

TEST_CASE("dependency chaining consumes the most recent compatible outputs") {
    const Catalog catalog = Catalog::core();

    DecodedTokens disjunction;
    disjunction.ops = {"select", "exist", "select", "exist", "or"};
    disjunction.args = {"bird", "", "chair", "", ""};
    const Program p = assemble_program(disjunction, catalog);
    CHECK(p.functions[1].dependencies == std::vector<int>{0});
    CHECK(p.functions[3].dependencies == std::vector<int>{2});
    CHECK(p.functions[4].dependencies == std::vector<int>{1, 3});

    DecodedTokens comparison;
    comparison.ops = {"select", "select", "same color"};
    comparison.args = {"bird", "chair", ""};
    CHECK(assemble_program(comparison, catalog).functions[2].dependencies ==
          std::vector<int>{0, 1});

    DecodedTokens chained;
    chained.ops = {"select", "filter color", "relate", "query name"};
    chained.args = {"bird", "red", "_, above", ""};
    const Program q = assemble_program(chained, catalog);
    CHECK(q.functions[1].dependencies == std::vector<int>{0});
    CHECK(q.functions[2].dependencies == std::vector<int>{1});
    CHECK(q.functions[3].dependencies == std::vector<int>{2});
}

TEST_CASE("impossible decodes surface as parse failures") {
    const Catalog catalog = Catalog::core();

    DecodedTokens headless;
    headless.ops = {"exist"};
    headless.args = {""};
    CHECK_THROWS_AS(assemble_program(headless, catalog), ParseFailure);

    DecodedTokens starved;
    starved.ops = {"select", "exist", "select", "same color"};
    starved.args = {"bird", "", "chair", ""};
    CHECK_THROWS_AS(assemble_program(starved, catalog), ParseFailure);

    DecodedTokens unknown;
    unknown.ops = {"select", "teleport"};
    unknown.args = {"bird", ""};
    CHECK_THROWS_AS(assemble_program(unknown, catalog), ParseFailure);

    DecodedTokens empty;
    CHECK_THROWS_AS(assemble_program(empty, catalog), ParseFailure);

    DecodedTokens dangling;
    dangling.ops = {"select", "exist", "select"};
    dangling.args = {"bird", "", "chair"};
    CHECK_THROWS_AS(assemble_program(dangling, catalog), ParseFailure);
}

TEST_CASE("teacher-forced loss is finite, positive, and order-independent") {
    const auto corpus = tiny_corpus();
    ParserModel model(tiny_config(), ParserVocab::build(corpus), 5);

    double forward_sum = 0.0, reverse_sum = 0.0;
    for (const auto& pair : corpus) {
        Tape tape;
        const Var loss = model.sample_loss(tape, pair);
        const double value = tape.value(loss.id)(0, 0);
        CHECK(std::isfinite(value));
        CHECK(value > 0.0);
        forward_sum += value;
    }
    for (auto it = corpus.rbegin(); it != corpus.rend(); ++it) {
        Tape tape;
        reverse_sum += tape.value(model.sample_loss(tape, *it).id)(0, 0);
    }
    CHECK(std::abs(forward_sum - reverse_sum) < 1e-12);
}

TEST_CASE("two hundred steps overfit a single pair") {
    const auto corpus = std::vector<QAPair>{tiny_corpus()[1]};
    ParserConfig config = ParserConfig::toy();
    config.batch_size = 1;
    ParserModel model(config, ParserVocab::build(corpus), 7);

    const TrainReport report = model.train(corpus, 21, 200);
    REQUIRE(report.losses.size() == 200);
    CHECK(report.losses.back() < 0.1 * report.losses.front());

    const DecodedTokens decoded = model.predict_tokens(corpus[0].question);
    REQUIRE(decoded.ops.size() == 2);
    CHECK(decoded.ops[0] == "select");
    CHECK(decoded.ops[1] == "query color");
    CHECK(decoded.args[0] == "chair");
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
    const auto corpus = tiny_corpus();
    ParserConfig config = tiny_config();
    config.learning_rate = 0.0;
    ParserModel model(config, ParserVocab::build(corpus), 9);

    std::map<std::string, Mat> before;
    for (const auto& name : model.params().names()) before[name] = model.params().get(name);
    model.train(corpus, 3, 5);
    for (const auto& name : model.params().names())
        CHECK((model.params().get(name) - before[name]).norm() == 0.0);
}

TEST_CASE("training resumes without perturbing the step sequence") {
    const auto corpus = tiny_corpus();
    ParserModel straight(tiny_config(), ParserVocab::build(corpus), 13);
    const TrainReport full = straight.train(corpus, 31, 10);

    ParserModel chunked(tiny_config(), ParserVocab::build(corpus), 13);
    const TrainReport head = chunked.train(corpus, 31, 5);
    const TrainReport tail = chunked.train(corpus, 31, 5, 5);

    std::vector<double> stitched = head.losses;
    stitched.insert(stitched.end(), tail.losses.begin(), tail.losses.end());
    CHECK(full.losses == stitched);
    for (const auto& name : straight.params().names())
        CHECK((straight.params().get(name) - chunked.params().get(name)).norm() == 0.0);
}

TEST_CASE("analytic gradients match central differences on toy samples") {
    const auto corpus = tiny_corpus();
    ParserModel model(tiny_config(), ParserVocab::build(corpus), 17);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(model.grad_check(corpus[i], 1e-5) < 1e-6);
    }
}

TEST_CASE("a poisoned parameter turns into a training abort") {
    const auto corpus = tiny_corpus();
    ParserModel model(tiny_config(), ParserVocab::build(corpus), 19);
    model.params().get("parser.head.op")(0, 0) = std::nan("");
    CHECK_THROWS_AS(model.train(corpus, 1, 1), NonFiniteLoss);
}

TEST_CASE("configuration and input guards reject misuse") {
    const auto corpus = tiny_corpus();
    ParserConfig bad = tiny_config();
    bad.hidden_dim = 0;
    CHECK_THROWS_AS(ParserModel(bad, ParserVocab::build(corpus), 1), ConfigError);

    ParserModel model(tiny_config(), ParserVocab::build(corpus), 1);
    CHECK_THROWS_AS(model.predict_tokens({}), EmptyInput);
    CHECK_THROWS_AS(model.train({}, 1, 1), EmptyInput);

    std::vector<std::string> marathon(40, "bird");
    CHECK_THROWS_AS(model.predict_tokens(marathon), ConfigError);

    QAPair foreign = make_pair("is there a dog ?", "Select: dog\nExist: [0]");
    Tape tape;
    CHECK_THROWS_AS(model.sample_loss(tape, foreign), ConfigError);
}

TEST_CASE("held-out scoring counts aligned tokens and length mismatches") {
    const auto corpus = tiny_corpus();
    ParserModel model(tiny_config(), ParserVocab::build(corpus), 23);
    const ParserEval eval = evaluate_parser(model, corpus);
    CHECK(eval.pairs == 4);
    CHECK(eval.op_accuracy >= 0.0);
    CHECK(eval.op_accuracy <= 1.0);
    CHECK(eval.function_accuracy <= eval.op_accuracy);
    CHECK(eval.function_accuracy <= eval.arg_accuracy);
}
