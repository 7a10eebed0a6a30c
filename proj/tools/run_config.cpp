#include "run_config.hpp"

#include <filesystem>

#include "sgqa/artifacts.hpp"

namespace sgqa {

namespace {

// Overlays the user's section onto a full baseline document so partial
// sections inherit the run defaults, and typos surface as errors.
Json merge_section(const Json& base, const Json& user, const std::string& section) {
    if (!user.is_object())
        throw ConfigError("run-config section '" + section + "' must be an object");
    Json merged = base;
    for (const auto& [key, value] : user.items()) {
        if (!merged.contains(key))
            throw ConfigError("unknown key '" + key + "' in run-config section '" +
                              section + "'");
        merged[key] = value;
    }
    return merged;
}

}  // namespace

Policy policy_from_name(const std::string& name) {
    if (name == "strict") return Policy::Strict;
    if (name == "lenient") return Policy::Lenient;
    throw ConfigError("policy must be 'strict' or 'lenient', got '" + name + "'");
}

const char* policy_name(Policy policy) {
    return policy == Policy::Strict ? "strict" : "lenient";
}

void RunConfig::check() const {
    if (corpus.pairs <= 0) throw ConfigError("corpus.pairs must be positive");
    if (corpus.graphs <= 0) throw ConfigError("corpus.graphs must be positive");
    if (corpus.objects <= 0) throw ConfigError("corpus.objects must be positive");
    if (!noise.valid()) throw ConfigError("noise probabilities must lie in [0,1]");
    parser.check();
    encoder.check();
}

Json RunConfig::to_json() const {
    Json j;
    j["ontology"] = ontology_path;
    j["out_dir"] = out_dir;
    j["policy"] = policy_name(policy);
    j["seed"] = seed;
    j["corpus"] = Json{{"pairs", corpus.pairs},
                       {"graphs", corpus.graphs},
                       {"objects", corpus.objects}};
    j["noise"] = Json{{"p_class", noise.p_class},
                      {"p_attr", noise.p_attr},
                      {"p_drop_edge", noise.p_drop_edge},
                      {"p_drop_obj", noise.p_drop_obj},
                      {"seed", noise.seed}};
    j["parser"] = parser.to_json();
    j["encoder"] = encoder.to_json();
    return j;
}

RunConfig RunConfig::from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig base;
    const Json defaults = base.to_json();
    const Json merged = merge_section(defaults, j, "<root>");

    RunConfig c;
    c.ontology_path = merged.at("ontology").get<std::string>();
    c.out_dir = merged.at("out_dir").get<std::string>();
    c.policy = policy_from_name(merged.at("policy").get<std::string>());
    c.seed = merged.at("seed").get<uint64_t>();

    const Json corpus = merge_section(defaults.at("corpus"), j.value("corpus", Json::object()),
                                      "corpus");
    c.corpus.pairs = corpus.at("pairs").get<int>();
    c.corpus.graphs = corpus.at("graphs").get<int>();
    c.corpus.objects = corpus.at("objects").get<int>();

    const Json noise =
        merge_section(defaults.at("noise"), j.value("noise", Json::object()), "noise");
    c.noise.p_class = noise.at("p_class").get<double>();
    c.noise.p_attr = noise.at("p_attr").get<double>();
    c.noise.p_drop_edge = noise.at("p_drop_edge").get<double>();
    c.noise.p_drop_obj = noise.at("p_drop_obj").get<double>();
    c.noise.seed = noise.at("seed").get<uint64_t>();

    c.parser = ParserConfig::from_json(
        merge_section(defaults.at("parser"), j.value("parser", Json::object()), "parser"));
    c.encoder = EncoderConfig::from_json(
        merge_section(defaults.at("encoder"), j.value("encoder", Json::object()), "encoder"));
    c.check();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return from_json(load_json_file(path));
}

Ontology RunConfig::resolve_ontology() const {
    const auto from_file = [](const std::string& path) {
        const Json doc = load_json_file(path);
        return Ontology::from_json(doc.contains("ontology") ? doc.at("ontology") : doc);
    };
    if (!ontology_path.empty()) return from_file(ontology_path);
    const std::string snapshot = out_dir + "/ontology.json";
    if (std::filesystem::exists(snapshot)) return from_file(snapshot);
    return Ontology::default_toy();
}

std::string RunConfig::hash() const {
    // The output location does not shape any generated content, so two runs
    // of one experiment written to different directories share a hash.
    Json j = to_json();
    j.erase("out_dir");
    return config_hash(j);
}

Json RunConfig::header(const std::string& kind) const {
    return artifact_header(kind, hash(), seed);
}

}  // namespace sgqa
