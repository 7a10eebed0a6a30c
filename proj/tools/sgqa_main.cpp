// Command-line harness: dataset generation, program execution, model
// training, metric evaluation and trace inspection over one run directory.
// Exit codes: 0 ok, 2 configuration or input-document problem, 3 generation
// failure, 4 execution failure, 5 training failure.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "sgqa/artifacts.hpp"
#include "sgqa/grammar.hpp"
#include "sgqa/metrics.hpp"
#include "sgqa/version.hpp"
#include "sgqa/weights_io.hpp"

namespace fs = std::filesystem;
using namespace sgqa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitExecution = 4;
constexpr int kExitTraining = 5;

struct CommonOpts {
    std::string config_path;
    std::string policy;
    std::string out;
    uint64_t seed = 0;
    bool seed_set = false;
    bool out_set = false;
    bool policy_set = false;
    bool pretty = false;
};

void add_common(CLI::App* sub, CommonOpts& opts, bool with_pretty = false) {
    sub->add_option("--config", opts.config_path, "run-config JSON file");
    sub->add_option("--policy", opts.policy, "execution policy: strict or lenient")
        ->check(CLI::IsMember({"strict", "lenient"}));
    sub->add_option("--seed", opts.seed, "master seed override");
    sub->add_option("--out", opts.out, "output override (directory, or file for exec)");
    if (with_pretty) sub->add_flag("--pretty", opts.pretty, "human-readable rendering");
}

RunConfig effective_config(const CommonOpts& opts) {
    RunConfig cfg = RunConfig::load(opts.config_path);
    if (opts.policy_set) cfg.policy = policy_from_name(opts.policy);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.out_set) cfg.out_dir = opts.out;
    if (const char* env = std::getenv("ENGINE_SEED")) {
        const std::string text = env;
        uint64_t value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size())
            throw ConfigError("ENGINE_SEED must be an unsigned integer, got '" + text + "'");
        cfg.seed = value;
        cfg.noise.seed = value;
    }
    cfg.check();
    return cfg;
}

// Maps engine failures onto the documented exit codes. `stage_code` is the
// command's failure class; parse failures count as execution-stage input
// only in exec itself, elsewhere they indicate a bad document.
int run_guarded(int stage_code, const std::function<int()>& body) {
    const auto report = [](const char* kind, const std::exception& e) {
        std::fprintf(stderr, "sgqa: %s: %s\n", kind, e.what());
    };
    try {
        return body();
    } catch (const ConfigError& e) {
        report("config error", e);
        return kExitConfig;
    } catch (const MalformedDocument& e) {
        report("malformed document", e);
        return kExitConfig;
    } catch (const NonFiniteLoss& e) {
        report("training diverged", e);
        return kExitTraining;
    } catch (const ParseError& e) {
        report("parse error", e);
        return stage_code == kExitExecution ? kExitExecution : kExitConfig;
    } catch (const ParseFailure& e) {
        report("parse failure", e);
        return stage_code == kExitExecution ? kExitExecution : kExitConfig;
    } catch (const EngineError& e) {
        report("error", e);
        return stage_code;
    } catch (const std::exception& e) {
        report("unexpected error", e);
        return 1;
    }
}

Json manifest_open(const RunConfig& cfg) {
    const Json header = cfg.header("manifest");
    const std::string path = cfg.out_dir + "/manifest.json";
    if (fs::exists(path)) {
        try {
            Json existing = load_json_file(path);
            if (existing.is_object() && existing.contains("header") &&
                existing["header"].value("config_hash", std::string()) ==
                    header.at("config_hash").get<std::string>()) {
                existing["header"] = header;
                if (!existing.contains("artifacts")) existing["artifacts"] = Json::object();
                if (!existing.contains("reports")) existing["reports"] = Json::object();
                return existing;
            }
        } catch (const MalformedDocument&) {
        }
    }
    return Json{{"header", header}, {"artifacts", Json::object()}, {"reports", Json::object()}};
}

void put_sorted(Json& object, const std::string& key, Json value) {
    std::map<std::string, Json> entries;
    for (const auto& [k, v] : object.items()) entries[k] = v;
    entries[key] = std::move(value);
    Json sorted = Json::object();
    for (auto& [k, v] : entries) sorted[k] = std::move(v);
    object = std::move(sorted);
}

void manifest_write(const RunConfig& cfg, const Json& manifest) {
    save_json_file(cfg.out_dir + "/manifest.json", manifest);
}

std::map<std::string, SceneGraph> load_graph_map(const std::string& path) {
    std::map<std::string, SceneGraph> out;
    for (const Json& record : read_jsonl(path)) {
        SceneGraph graph = scene_from_json(record);
        out[graph.image_id] = std::move(graph);
    }
    if (out.empty()) throw MalformedDocument(path + " holds no graphs");
    return out;
}

SceneGraph load_graph_file(const std::string& path, const std::string& graph_id) {
    if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl") {
        for (const Json& record : read_jsonl(path)) {
            SceneGraph graph = scene_from_json(record);
            if (graph_id.empty() || graph.image_id == graph_id) return graph;
        }
        throw MalformedDocument("no graph '" + graph_id + "' in " + path);
    }
    const Json doc = load_json_file(path);
    return scene_from_json(doc.is_object() && doc.contains("scene") ? doc.at("scene") : doc);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedDocument("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

void write_trace_file(const std::string& path, const Json& header, const Trace& trace) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw MalformedDocument("cannot open " + path + " for writing");
    out << header.dump() << "\n" << trace_to_jsonl(trace);
    if (!out) throw MalformedDocument("short write to " + path);
}

// ---------------------------------------------------------------- gen ----

int cmd_gen(const RunConfig& cfg) {
    const Ontology ontology = cfg.ontology_path.empty()
                                  ? Ontology::default_toy()
                                  : [&] {
                                        const Json doc = load_json_file(cfg.ontology_path);
                                        return Ontology::from_json(
                                            doc.contains("ontology") ? doc.at("ontology")
                                                                     : doc);
                                    }();
    std::string why;
    if (!ontology.check_invariants(&why)) throw ConfigError("ontology: " + why);

    std::vector<SceneGraph> graphs;
    graphs.reserve(static_cast<size_t>(cfg.corpus.graphs));
    for (int i = 0; i < cfg.corpus.graphs; ++i) {
        graphs.push_back(generate_scene(ontology, cfg.corpus.objects,
                                        derive_seed(cfg.seed, "graph-" + std::to_string(i))));
    }

    const Catalog catalog = Catalog::core();
    const Corpus corpus =
        generate_corpus(QuestionGrammar::default_grammar(), graphs, cfg.corpus.pairs,
                        derive_seed(cfg.seed, "corpus"), ontology, catalog);

    fs::create_directories(cfg.out_dir);
    Json manifest = manifest_open(cfg);
    Json& artifacts = manifest["artifacts"];

    save_json_file(cfg.out_dir + "/ontology.json",
                   Json{{"header", cfg.header("ontology")}, {"ontology", ontology.to_json()}});
    put_sorted(artifacts, "ontology", "ontology.json");

    std::vector<Json> graph_records;
    for (const SceneGraph& graph : graphs) graph_records.push_back(scene_to_json(graph));
    write_jsonl(cfg.out_dir + "/graphs.jsonl", cfg.header("graphs"), graph_records);
    put_sorted(artifacts, "graphs", "graphs.jsonl");

    const auto write_split = [&](const std::string& name, const std::vector<QAPair>& pairs) {
        std::vector<Json> records;
        for (size_t i = 0; i < pairs.size(); ++i) {
            Json record;
            record["question_id"] = name + "-" + std::to_string(i);
            const Json fields = qa_to_json(pairs[i]);
            for (const auto& [key, value] : fields.items()) record[key] = value;
            records.push_back(std::move(record));
        }
        write_jsonl(cfg.out_dir + "/corpus_" + name + ".jsonl",
                    cfg.header("corpus-" + name), records);
        put_sorted(artifacts, "corpus_" + name, "corpus_" + name + ".jsonl");
    };
    write_split("train", corpus.train);
    write_split("val", corpus.val);
    write_split("test", corpus.test);

    const bool noisy = cfg.noise.p_class > 0.0 || cfg.noise.p_attr > 0.0 ||
                       cfg.noise.p_drop_edge > 0.0 || cfg.noise.p_drop_obj > 0.0;
    if (noisy) {
        std::vector<Json> corrupted;
        for (const SceneGraph& graph : graphs) {
            NoiseSpec spec = cfg.noise;
            spec.seed = derive_seed(cfg.noise.seed, graph.image_id);
            corrupted.push_back(scene_to_json(corrupt(graph, spec)));
        }
        write_jsonl(cfg.out_dir + "/graphs_corrupted.jsonl", cfg.header("graphs-corrupted"),
                    corrupted);
        put_sorted(artifacts, "graphs_corrupted", "graphs_corrupted.jsonl");
    }

    manifest_write(cfg, manifest);
    std::printf("generated %d graphs and %zu/%zu/%zu train/val/test pairs -> %s\n",
                cfg.corpus.graphs, corpus.train.size(), corpus.val.size(),
                corpus.test.size(), cfg.out_dir.c_str());
    return kExitOk;
}

// --------------------------------------------------------------- exec ----

struct ExecOpts {
    std::string graph_path;
    std::string graph_id;
    std::string program_path;
    std::string question;
    std::string weights_path;
    std::string vocab_path;
    std::string corpus_path;
};

std::optional<ParserModel> load_parser(const RunConfig& cfg, const ExecOpts& opts) {
    if (opts.weights_path.empty()) return std::nullopt;
    const std::string vocab_path = opts.vocab_path.empty()
                                       ? cfg.out_dir + "/parser_vocab.json"
                                       : opts.vocab_path;
    const Json vocab_doc = load_json_file(vocab_path);
    const ParserVocab vocab = ParserVocab::from_json(
        vocab_doc.contains("vocab") ? vocab_doc.at("vocab") : vocab_doc);
    ParserModel model(cfg.parser, vocab, derive_seed(cfg.seed, "train-parser"));
    load_weights(model.params(), opts.weights_path);
    return model;
}

int exec_single(const RunConfig& cfg, const CommonOpts& common, const ExecOpts& opts) {
    if (opts.graph_path.empty())
        throw ConfigError("exec needs --graph (or --corpus for batch mode)");
    if (opts.program_path.empty() == opts.question.empty())
        throw ConfigError("exec needs exactly one of --program or --question");

    const SceneGraph graph = load_graph_file(opts.graph_path, opts.graph_id);
    const Catalog catalog = Catalog::core();

    Program program;
    if (!opts.program_path.empty()) {
        program = parse_program_text(read_text_file(opts.program_path), catalog);
    } else {
        const auto model = load_parser(cfg, opts);
        if (!model) throw ConfigError("--question needs --weights (a trained parser)");
        program = model->predict_program(tokenize(opts.question));
    }

    const ExecResult result = execute(program, graph, catalog, cfg.policy);
    if (!result.ok()) {
        const ExecError& error = *result.error;
        std::fprintf(stderr, "sgqa: execution failed at step %d: %s (%s)\n", error.step,
                     error.message.c_str(), exec_error_kind_name(error.kind));
        return kExitExecution;
    }

    const Trace& trace = *result.trace;
    if (!common.pretty) {
        for (const std::string& flag : trace.flags)
            std::fprintf(stderr, "flag: %s\n", flag.c_str());
    }
    if (!common.out.empty())
        write_trace_file(common.out, cfg.header("trace"), trace);
    if (common.pretty) {
        std::fputs(trace_pretty(trace).c_str(), stdout);
        std::printf("answer: %s\n", answer_of(trace).c_str());
    } else {
        std::printf("%s\n", answer_of(trace).c_str());
    }
    return kExitOk;
}

int exec_batch(const RunConfig& cfg, const CommonOpts& common, const ExecOpts& opts) {
    if (!opts.program_path.empty() || !opts.question.empty())
        throw ConfigError("batch exec takes programs from the corpus file");
    const std::string graphs_path =
        opts.graph_path.empty() ? cfg.out_dir + "/graphs.jsonl" : opts.graph_path;
    const std::map<std::string, SceneGraph> graphs = load_graph_map(graphs_path);
    const Catalog catalog = Catalog::core();
    const std::vector<Json> records = read_jsonl(opts.corpus_path);
    if (records.empty()) throw MalformedDocument(opts.corpus_path + " holds no questions");
    const std::optional<ParserModel> model = load_parser(cfg, opts);

    int parse_fallbacks = 0;
    std::vector<Json> predictions;
    for (size_t i = 0; i < records.size(); ++i) {
        const Json& record = records[i];
        const std::string id =
            record.value("question_id", "q" + std::to_string(i));
        const std::string graph_id = record.value("graph_id", std::string());
        const auto graph = graphs.find(graph_id);
        if (graph == graphs.end())
            throw MalformedDocument("question " + id + " references unknown graph '" +
                                    graph_id + "'");

        std::string predicted;
        std::optional<Program> program;
        if (model) {
            try {
                program = model->predict_program(
                    tokenize(record.at("question").get<std::string>()));
            } catch (const ParseFailure& e) {
                if (cfg.policy == Policy::Strict) throw;
                ++parse_fallbacks;
                predicted = "unknown";
            }
        } else {
            program = program_from_json(record.at("program"), catalog);
        }
        if (program) {
            const ExecResult result = execute(*program, graph->second, catalog, cfg.policy);
            if (!result.ok()) {
                const ExecError& error = *result.error;
                std::fprintf(stderr, "sgqa: question %s failed at step %d: %s\n", id.c_str(),
                             error.step, error.message.c_str());
                return kExitExecution;
            }
            predicted = answer_of(*result.trace);
        }
        predictions.push_back(Json{{"question_id", id}, {"predicted", predicted}});
    }

    const std::string out_path =
        common.out.empty() ? cfg.out_dir + "/predictions.jsonl" : common.out;
    write_jsonl(out_path, cfg.header("predictions"), predictions);
    if (parse_fallbacks > 0)
        std::fprintf(stderr, "flag: %d questions fell back to 'unknown' on parse failure\n",
                     parse_fallbacks);
    std::printf("executed %zu questions -> %s\n", predictions.size(), out_path.c_str());
    return kExitOk;
}

int cmd_exec(const RunConfig& cfg, const CommonOpts& common, const ExecOpts& opts) {
    return opts.corpus_path.empty() ? exec_single(cfg, common, opts)
                                    : exec_batch(cfg, common, opts);
}

// -------------------------------------------------------------- train ----

struct TrainOpts {
    std::string component;
    int steps = 0;
    bool resume = false;
};

std::vector<QAPair> read_split(const RunConfig& cfg, const Catalog& catalog,
                               const std::string& split) {
    const std::string path = cfg.out_dir + "/corpus_" + split + ".jsonl";
    if (!fs::exists(path))
        throw ConfigError("missing corpus file " + path + "; run 'sgqa gen' first");
    std::vector<QAPair> pairs;
    for (const Json& record : read_jsonl(path)) pairs.push_back(qa_from_json(record, catalog));
    if (pairs.empty()) throw ConfigError(path + " holds no pairs");
    return pairs;
}

void append_loss_records(std::vector<Json>& records, const TrainReport& report, int start) {
    for (size_t i = 0; i < report.losses.size(); ++i) {
        records.push_back(Json{{"step", start + static_cast<int>(i)},
                               {"loss", report.losses[i]}});
    }
}

int train_parser(const RunConfig& cfg, const TrainOpts& opts) {
    const Catalog catalog = Catalog::core();
    const std::vector<QAPair> train_pairs = read_split(cfg, catalog, "train");
    const std::vector<QAPair> val_pairs = read_split(cfg, catalog, "val");

    const std::string weights_path = cfg.out_dir + "/parser_weights.bin";
    const std::string vocab_path = cfg.out_dir + "/parser_vocab.json";
    const std::string loss_path = cfg.out_dir + "/parser_loss.jsonl";
    const uint64_t seed = derive_seed(cfg.seed, "train-parser");

    std::optional<ParserModel> model;
    std::vector<Json> loss_records;
    int start = 0;
    if (opts.resume) {
        const Json vocab_doc = load_json_file(vocab_path);
        model.emplace(cfg.parser,
                      ParserVocab::from_json(vocab_doc.contains("vocab")
                                                 ? vocab_doc.at("vocab")
                                                 : vocab_doc),
                      seed);
        load_weights(model->params(), weights_path);
        loss_records = read_jsonl(loss_path);
        start = static_cast<int>(loss_records.size());
    } else {
        model.emplace(cfg.parser, ParserVocab::build(train_pairs), seed);
    }

    const int target = opts.steps > 0 ? opts.steps : cfg.parser.max_steps;
    if (target > start) {
        const TrainReport report = model->train(train_pairs, seed, target - start, start);
        append_loss_records(loss_records, report, start);
    } else {
        std::fprintf(stderr, "parser already trained for %d steps (target %d)\n", start,
                     target);
    }

    save_weights(model->params(), weights_path, cfg.header("parser-weights"));
    save_json_file(vocab_path, Json{{"header", cfg.header("parser-vocab")},
                                    {"vocab", model->vocab().to_json()}});
    write_jsonl(loss_path, cfg.header("parser-loss"), loss_records);

    const ParserEval eval = evaluate_parser(*model, val_pairs);
    std::printf(
        "parser: %zu steps, val operation %.4f argument %.4f function %.4f over %d pairs\n",
        loss_records.size(), eval.op_accuracy, eval.arg_accuracy, eval.function_accuracy,
        eval.pairs);

    Json manifest = manifest_open(cfg);
    put_sorted(manifest["artifacts"], "parser_weights", "parser_weights.bin");
    put_sorted(manifest["artifacts"], "parser_vocab", "parser_vocab.json");
    put_sorted(manifest["artifacts"], "parser_loss", "parser_loss.jsonl");
    put_sorted(manifest["reports"], "parser",
               Json{{"steps", loss_records.size()},
                    {"val_op_accuracy", eval.op_accuracy},
                    {"val_arg_accuracy", eval.arg_accuracy},
                    {"val_function_accuracy", eval.function_accuracy},
                    {"val_pairs", eval.pairs}});
    manifest_write(cfg, manifest);
    return kExitOk;
}

int train_encoder(const RunConfig& cfg, const TrainOpts& opts) {
    const Catalog catalog = Catalog::core();
    const std::vector<QAPair> train_pairs = read_split(cfg, catalog, "train");
    const std::vector<QAPair> val_pairs = read_split(cfg, catalog, "val");
    const std::string graphs_path = cfg.out_dir + "/graphs.jsonl";
    if (!fs::exists(graphs_path))
        throw ConfigError("missing " + graphs_path + "; run 'sgqa gen' first");
    const std::map<std::string, SceneGraph> graphs = load_graph_map(graphs_path);
    const Ontology ontology = cfg.resolve_ontology();

    const auto to_samples = [&](const std::vector<QAPair>& pairs) {
        std::vector<EncoderSample> samples;
        for (const QAPair& pair : pairs) {
            const auto graph = graphs.find(pair.graph_id);
            if (graph == graphs.end())
                throw MalformedDocument("corpus references unknown graph '" + pair.graph_id +
                                        "'");
            EncoderSample sample;
            sample.graph = &graph->second;
            sample.program = pair.program;
            sample.question = pair.question;
            sample.answer = pair.answer;
            samples.push_back(std::move(sample));
        }
        return samples;
    };
    const std::vector<EncoderSample> train_samples = to_samples(train_pairs);
    const std::vector<EncoderSample> val_samples = to_samples(val_pairs);

    const std::string weights_path = cfg.out_dir + "/encoder_weights.bin";
    const std::string vocab_path = cfg.out_dir + "/encoder_vocab.json";
    const std::string loss_path = cfg.out_dir + "/encoder_loss.jsonl";
    const uint64_t seed = derive_seed(cfg.seed, "train-encoder");

    const FeatureSynthesizer synth(ontology, cfg.encoder.feature_dim,
                                   derive_seed(cfg.seed, "features"));
    const FeatureFn features = [synth](const SceneGraph& graph, const ObjectId& id) {
        return synth.features(graph.at(id), 0.0, 0);
    };

    std::optional<EncoderModel> model;
    std::vector<Json> loss_records;
    int start = 0;
    if (opts.resume) {
        const Json vocab_doc = load_json_file(vocab_path);
        model.emplace(cfg.encoder,
                      EncoderVocab::from_json(vocab_doc.contains("vocab")
                                                  ? vocab_doc.at("vocab")
                                                  : vocab_doc),
                      features, derive_seed(cfg.seed, "encoder-init"));
        load_weights(model->params(), weights_path);
        loss_records = read_jsonl(loss_path);
        start = static_cast<int>(loss_records.size());
    } else {
        std::vector<std::vector<std::string>> questions;
        std::vector<std::string> answers;
        for (const QAPair& pair : train_pairs) {
            questions.push_back(pair.question);
            answers.push_back(pair.answer);
        }
        model.emplace(cfg.encoder, EncoderVocab::build(questions, answers), features,
                      derive_seed(cfg.seed, "encoder-init"));
    }

    const int target = opts.steps > 0 ? opts.steps : cfg.encoder.max_steps;
    if (target > start) {
        const TrainReport report = model->train(train_samples, seed, target - start, start);
        append_loss_records(loss_records, report, start);
    } else {
        std::fprintf(stderr, "encoder already trained for %d steps (target %d)\n", start,
                     target);
    }

    save_weights(model->params(), weights_path, cfg.header("encoder-weights"));
    save_json_file(vocab_path, Json{{"header", cfg.header("encoder-vocab")},
                                    {"vocab", model->vocab().to_json()}});
    write_jsonl(loss_path, cfg.header("encoder-loss"), loss_records);

    int correct = 0;
    for (const EncoderSample& sample : val_samples) {
        const LayoutResult result =
            model->run_layout(sample.program, *sample.graph, sample.question, cfg.policy);
        correct += result.answer == sample.answer ? 1 : 0;
    }
    const double accuracy =
        val_samples.empty() ? 0.0
                            : static_cast<double>(correct) / static_cast<double>(val_samples.size());
    std::printf("encoder: %zu steps, val answer accuracy %.4f over %zu pairs\n",
                loss_records.size(), accuracy, val_samples.size());

    Json manifest = manifest_open(cfg);
    put_sorted(manifest["artifacts"], "encoder_weights", "encoder_weights.bin");
    put_sorted(manifest["artifacts"], "encoder_vocab", "encoder_vocab.json");
    put_sorted(manifest["artifacts"], "encoder_loss", "encoder_loss.jsonl");
    put_sorted(manifest["reports"], "encoder",
               Json{{"steps", loss_records.size()},
                    {"val_answer_accuracy", accuracy},
                    {"val_pairs", val_samples.size()}});
    manifest_write(cfg, manifest);
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const TrainOpts& opts) {
    if (opts.component == "parser") return train_parser(cfg, opts);
    if (opts.component == "encoder") return train_encoder(cfg, opts);
    throw ConfigError("train component must be 'parser' or 'encoder'");
}

// --------------------------------------------------------------- eval ----

struct EvalOpts {
    std::string predictions_path;
    std::string gold_path;
    std::string graphs_path;
};

int cmd_eval(const RunConfig& cfg, const EvalOpts& opts) {
    const Catalog catalog = Catalog::core();

    std::map<std::string, Json> gold;
    for (const Json& record : read_jsonl(opts.gold_path)) {
        if (!record.contains("question_id"))
            throw MalformedDocument(opts.gold_path + ": gold record without question_id");
        const std::string id = record.at("question_id").get<std::string>();
        if (!gold.emplace(id, record).second)
            throw MalformedDocument(opts.gold_path + ": duplicate question_id " + id);
    }
    std::map<std::string, std::string> predicted;
    for (const Json& record : read_jsonl(opts.predictions_path)) {
        if (!record.contains("question_id") || !record.contains("predicted"))
            throw MalformedDocument(opts.predictions_path +
                                    ": prediction records need question_id and predicted");
        const std::string id = record.at("question_id").get<std::string>();
        if (!predicted.emplace(id, record.at("predicted").get<std::string>()).second)
            throw MalformedDocument(opts.predictions_path + ": duplicate question_id " + id);
    }
    if (gold.empty()) throw MalformedDocument(opts.gold_path + " holds no records");

    std::vector<std::string> missing;
    for (const auto& [id, record] : gold)
        if (predicted.find(id) == predicted.end()) missing.push_back(id + " (unpredicted)");
    for (const auto& [id, answer] : predicted)
        if (gold.find(id) == gold.end()) missing.push_back(id + " (no gold)");
    if (!missing.empty()) {
        std::string listing;
        for (size_t i = 0; i < missing.size() && i < 10; ++i)
            listing += (i ? ", " : "") + missing[i];
        throw ConfigError(std::to_string(missing.size()) +
                          " question ids do not align; first: " + listing);
    }

    Ontology ontology = cfg.resolve_ontology();
    const std::string graphs_path = !opts.graphs_path.empty()
                                        ? opts.graphs_path
                                        : (fs::exists(cfg.out_dir + "/graphs.jsonl")
                                               ? cfg.out_dir + "/graphs.jsonl"
                                               : std::string());
    if (!graphs_path.empty()) {
        std::vector<SceneGraph> graphs;
        for (const Json& record : read_jsonl(graphs_path))
            graphs.push_back(scene_from_json(record));
        ontology.plausibility_table = plausibility_from_graphs(graphs);
    }

    std::vector<PredictionRecord> records;
    for (const auto& [id, record] : gold) {
        records.push_back(make_record(id, program_from_json(record.at("program"), catalog),
                                      record.at("answer").get<std::string>(),
                                      predicted.at(id), ontology, catalog));
    }
    const MetricReport report = score(records, ontology);

    fs::create_directories(cfg.out_dir);
    const std::string text = format_report(report);
    {
        std::ofstream out(cfg.out_dir + "/report.txt", std::ios::trunc);
        out << text;
    }
    save_json_file(cfg.out_dir + "/report.json", Json{{"header", cfg.header("eval-report")},
                                                      {"report", report_to_json(report)}});
    std::vector<Json> group_records;
    for (const GroupBreakdown& group : distribution_breakdown(records)) {
        group_records.push_back(Json{{"group", group.group},
                                     {"records", group.records},
                                     {"divergence", group.divergence}});
    }
    write_jsonl(cfg.out_dir + "/eval_groups.jsonl", cfg.header("eval-groups"), group_records);

    Json manifest = manifest_open(cfg);
    put_sorted(manifest["artifacts"], "eval_report_text", "report.txt");
    put_sorted(manifest["artifacts"], "eval_report", "report.json");
    put_sorted(manifest["artifacts"], "eval_groups", "eval_groups.jsonl");
    put_sorted(manifest["reports"], "eval", report_to_json(report));
    manifest_write(cfg, manifest);

    std::fputs(text.c_str(), stdout);
    return kExitOk;
}

// ------------------------------------------------------ inspect-trace ----

int cmd_inspect(const std::string& path, bool pretty) {
    Json header;
    const std::vector<Json> records = read_jsonl(path, &header);
    if (!header.is_null()) {
        std::printf("trace: config %s seed %llu tool %s\n",
                    header.value("config_hash", std::string("?")).c_str(),
                    static_cast<unsigned long long>(header.value("seed", 0ULL)),
                    header.value("tool_version", std::string("?")).c_str());
    }
    for (const Json& record : records) {
        const int idx = record.value("idx", -1);
        const std::string op = record.value("op", std::string("?"));
        std::string args;
        for (const auto& a : record.value("args", Json::array()))
            args += (args.empty() ? "" : ", ") + a.get<std::string>();
        std::string deps;
        for (const auto& d : record.value("deps", Json::array()))
            deps += (deps.empty() ? "" : ", ") + std::to_string(d.get<int>());
        const Json attention = record.value("attention", Json::array());

        std::printf("[%d] %s", idx, op.c_str());
        if (!args.empty()) std::printf(": %s", args.c_str());
        if (!deps.empty()) std::printf(" [%s]", deps.c_str());
        std::printf(" -> %s %s", record.value("out_type", std::string("?")).c_str(),
                    record.value("out", Json()).dump().c_str());
        std::printf(" | %zu attended\n", attention.size());
        if (pretty) {
            for (const auto& region : attention) {
                if (!region.is_array() || region.size() < 5) continue;
                std::printf("      %s at (%.2f, %.2f) size %.2fx%.2f\n",
                            region[0].get<std::string>().c_str(), region[1].get<double>(),
                            region[2].get<double>(), region[3].get<double>(),
                            region[4].get<double>());
            }
        }
    }
    if (records.empty()) std::printf("(empty trace)\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-graph question answering engine"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    CommonOpts gen_common;
    CLI::App* gen = app.add_subcommand("gen", "generate world, corpus and manifests");
    add_common(gen, gen_common);

    CommonOpts exec_common;
    ExecOpts exec_opts;
    CLI::App* exec = app.add_subcommand("exec", "run a program or question on a graph");
    add_common(exec, exec_common, true);
    exec->add_option("--graph", exec_opts.graph_path, "scene JSON or graphs JSONL file");
    exec->add_option("--graph-id", exec_opts.graph_id, "graph id within a JSONL file");
    exec->add_option("--program", exec_opts.program_path, "program text file");
    exec->add_option("--question", exec_opts.question, "question text (needs --weights)");
    exec->add_option("--weights", exec_opts.weights_path, "trained parser weights");
    exec->add_option("--vocab", exec_opts.vocab_path, "parser vocabulary JSON");
    exec->add_option("--corpus", exec_opts.corpus_path,
                     "corpus JSONL for batch execution into predictions");

    CommonOpts train_common;
    TrainOpts train_opts;
    CLI::App* train = app.add_subcommand("train", "train the parser or the encoder");
    add_common(train, train_common);
    train->add_option("component", train_opts.component, "parser or encoder")
        ->required()
        ->check(CLI::IsMember({"parser", "encoder"}));
    train->add_option("--steps", train_opts.steps, "total step target override");
    train->add_flag("--resume", train_opts.resume, "continue from persisted weights");

    CommonOpts eval_common;
    EvalOpts eval_opts;
    CLI::App* eval = app.add_subcommand("eval", "score predictions against gold answers");
    add_common(eval, eval_common);
    eval->add_option("--predictions", eval_opts.predictions_path, "predictions JSONL")
        ->required();
    eval->add_option("--gold", eval_opts.gold_path, "gold corpus JSONL")->required();
    eval->add_option("--graphs", eval_opts.graphs_path,
                     "scene graphs for corpus-derived plausibility");

    CommonOpts inspect_common;
    std::string inspect_path;
    CLI::App* inspect = app.add_subcommand("inspect-trace", "render a trace file");
    inspect->add_option("--trace", inspect_path, "trace JSONL file")->required();
    inspect->add_flag("--pretty", inspect_common.pretty, "include attended regions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const auto finalize = [&](CommonOpts& opts, CLI::App* sub) {
        opts.seed_set = sub->count("--seed") > 0;
        opts.out_set = sub->count("--out") > 0;
        opts.policy_set = sub->count("--policy") > 0;
    };

    if (app.got_subcommand(gen)) {
        finalize(gen_common, gen);
        return run_guarded(kExitGeneration, [&] { return cmd_gen(effective_config(gen_common)); });
    }
    if (app.got_subcommand(exec)) {
        finalize(exec_common, exec);
        exec_common.out_set = false;  // exec's --out names the artifact file, not the run dir
        return run_guarded(kExitExecution, [&] {
            RunConfig cfg = effective_config(exec_common);
            return cmd_exec(cfg, exec_common, exec_opts);
        });
    }
    if (app.got_subcommand(train)) {
        finalize(train_common, train);
        return run_guarded(kExitTraining, [&] {
            return cmd_train(effective_config(train_common), train_opts);
        });
    }
    if (app.got_subcommand(eval)) {
        finalize(eval_common, eval);
        return run_guarded(kExitConfig,
                           [&] { return cmd_eval(effective_config(eval_common), eval_opts); });
    }
    if (app.got_subcommand(inspect)) {
        return run_guarded(kExitConfig,
                           [&] { return cmd_inspect(inspect_path, inspect_common.pretty); });
    }
    return kExitConfig;
}
