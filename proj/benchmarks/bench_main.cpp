#include <benchmark/benchmark.h>

#include "sgqa/encoder.hpp"
#include "sgqa/executor.hpp"
#include "sgqa/features.hpp"
#include "sgqa/grammar.hpp"
#include "sgqa/parser_model.hpp"
#include "sgqa/program.hpp"
#include "sgqa/scene_graph.hpp"

namespace {

using namespace sgqa;

void BM_GenerateScene(benchmark::State& state) {
    const Ontology ontology = Ontology::default_toy();
    uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_scene(ontology, state.range(0), seed++));
    }
}
BENCHMARK(BM_GenerateScene)->Arg(4)->Arg(8);

void BM_Execute(benchmark::State& state) {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    const SceneGraph graph = generate_scene(ontology, 8, 7);
    const Program program = parse_program_text(
        "Select: scene\nFilter hposition: left, [0]\nRelate: _, to the right of, [1]\n"
        "Query color: [2]",
        catalog);
    for (auto _ : state) {
        benchmark::DoNotOptimize(execute(program, graph, catalog, Policy::Lenient));
    }
}
BENCHMARK(BM_Execute);

void BM_Corrupt(benchmark::State& state) {
    const Ontology ontology = Ontology::default_toy();
    const SceneGraph graph = generate_scene(ontology, 8, 7);
    NoiseSpec spec;
    spec.p_class = 0.3;
    spec.p_attr = 0.3;
    for (auto _ : state) {
        spec.seed++;
        benchmark::DoNotOptimize(corrupt(graph, spec));
    }
}
BENCHMARK(BM_Corrupt);

Corpus bench_corpus() {
    const Ontology ontology = Ontology::default_toy();
    const Catalog catalog = Catalog::core();
    std::vector<SceneGraph> graphs;
    for (int i = 0; i < 10; ++i) graphs.push_back(generate_scene(ontology, 6, 100 + i));
    return generate_corpus(QuestionGrammar::default_grammar(), graphs, 160, 9, ontology,
                           catalog);
}

void BM_ParserGreedyDecode(benchmark::State& state) {
    const Corpus corpus = bench_corpus();
    ParserModel model(ParserConfig::toy(), ParserVocab::build(corpus.train), 5);
    size_t i = 0;
    for (auto _ : state) {
        const auto& question = corpus.train[i++ % corpus.train.size()].question;
        try {
            benchmark::DoNotOptimize(model.predict_program(question));
        } catch (const ParseFailure&) {
        }
    }
}
BENCHMARK(BM_ParserGreedyDecode);

void BM_ParserTrainStep(benchmark::State& state) {
    const Corpus corpus = bench_corpus();
    ParserModel model(ParserConfig::toy(), ParserVocab::build(corpus.train), 5);
    int step = 0;
    for (auto _ : state) {
        model.train(corpus.train, 3, 1, step++);
    }
}
BENCHMARK(BM_ParserTrainStep);

void BM_EncoderLayoutForward(benchmark::State& state) {
    const Ontology ontology = Ontology::default_toy();
    const Corpus corpus = bench_corpus();
    const SceneGraph graph = generate_scene(ontology, 6, 100);
    EncoderConfig config;
    const FeatureSynthesizer synth(ontology, config.feature_dim, 21);
    const FeatureFn features = [&synth](const SceneGraph& g, const ObjectId& id) {
        return synth.features(g.at(id), 0.05, 11);
    };
    std::vector<std::vector<std::string>> questions;
    std::vector<std::string> answers;
    for (const QAPair& pair : corpus.train) {
        questions.push_back(pair.question);
        answers.push_back(pair.answer);
    }
    EncoderModel model(config, EncoderVocab::build(questions, answers), features, 13);
    const QAPair* pair = nullptr;
    for (const QAPair& candidate : corpus.train) {
        if (candidate.graph_id == graph.image_id) {
            pair = &candidate;
            break;
        }
    }
    if (pair == nullptr) {
        state.SkipWithError("no corpus question landed on the benchmark graph");
        return;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.run_layout(pair->program, graph, pair->question));
    }
}
BENCHMARK(BM_EncoderLayoutForward);

}  // namespace

BENCHMARK_MAIN();
