#pragma once
// Run configuration for the command-line harness: one JSON document holding
// the master seed, world and corpus shape, noise spec, both model configs,
// the execution policy and the output directory. Command-line flags and the
// ENGINE_SEED variable override fields after loading; every artifact header
// embeds the hash of the effective configuration.

#include <cstdint>
#include <string>

#include "sgqa/encoder.hpp"
#include "sgqa/executor.hpp"
#include "sgqa/parser_model.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

struct CorpusSpec {
    int pairs = 2000;
    int graphs = 64;
    int objects = 6;
};

struct RunConfig {
    std::string ontology_path;  // "" = built-in toy world
    std::string out_dir = "runs/default";
    Policy policy = Policy::Lenient;
    uint64_t seed = 7;
    CorpusSpec corpus;
    NoiseSpec noise;
    ParserConfig parser = ParserConfig::toy();
    EncoderConfig encoder;

    void check() const;  // throws ConfigError
    Json to_json() const;
    static RunConfig from_json(const Json& j);
    // "" loads the built-in defaults.
    static RunConfig load(const std::string& path);

    // Explicit ontology path, else the out_dir snapshot, else the toy world.
    Ontology resolve_ontology() const;
    std::string hash() const;
    Json header(const std::string& kind) const;
};

Policy policy_from_name(const std::string& name);  // throws ConfigError
const char* policy_name(Policy policy);

}  // namespace sgqa
