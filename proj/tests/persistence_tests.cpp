#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "sgqa/artifacts.hpp"
#include "sgqa/autodiff.hpp"
#include "sgqa/rng.hpp"
#include "sgqa/weights_io.hpp"

using namespace sgqa;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

ParamStore sample_store(uint64_t seed) {
    ParamStore ps;
    Rng rng(seed);
    ps.create("decoder.W", 5, 3);
    ps.create("embed.table", 7, 4);
    ps.create("encoder.b", 1, 6);
    for (const auto& name : ps.names()) {
        Mat& m = ps.get(name);
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
    }
    return ps;
}

}  // namespace

TEST_CASE("weights survive a save/load round trip bit-exactly") {
    const std::string path = temp_path("sgqa_weights_rt.bin");
    ParamStore original = sample_store(11);
    save_weights(original, path);

    ParamStore loaded;
    load_weights(loaded, path);
    REQUIRE(loaded.names() == original.names());
    for (const auto& name : original.names()) {
        CHECK((loaded.get(name) - original.get(name)).norm() == 0.0);
    }

    const std::string second = temp_path("sgqa_weights_rt2.bin");
    save_weights(loaded, second);
    CHECK(slurp(path) == slurp(second));

    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
    std::remove(second.c_str());
    std::remove((second + ".json").c_str());
}

TEST_CASE("loading into a populated store enforces exact shape agreement") {
    const std::string path = temp_path("sgqa_weights_shape.bin");
    save_weights(sample_store(3), path);

    ParamStore matching = sample_store(99);
    CHECK_NOTHROW(load_weights(matching, path));
    CHECK(matching.get("decoder.W")(0, 0) == sample_store(3).get("decoder.W")(0, 0));

    ParamStore wrong_shape;
    wrong_shape.create("decoder.W", 5, 3);
    wrong_shape.create("embed.table", 7, 5);
    wrong_shape.create("encoder.b", 1, 6);
    CHECK_THROWS_AS(load_weights(wrong_shape, path), MalformedDocument);

    ParamStore wrong_names;
    wrong_names.create("decoder.W", 5, 3);
    wrong_names.create("embed.other", 7, 4);
    wrong_names.create("encoder.b", 1, 6);
    CHECK_THROWS_AS(load_weights(wrong_names, path), MalformedDocument);

    ParamStore wrong_count;
    wrong_count.create("decoder.W", 5, 3);
    CHECK_THROWS_AS(load_weights(wrong_count, path), MalformedDocument);

    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST_CASE("corrupt weights files are rejected") {
    const std::string path = temp_path("sgqa_weights_bad.bin");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC rest";
    }
    ParamStore ps;
    CHECK_THROWS_AS(load_weights(ps, path), MalformedDocument);

    save_weights(sample_store(5), path);
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() / 2);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << bytes;
    }
    ParamStore truncated;
    CHECK_THROWS_AS(load_weights(truncated, path), MalformedDocument);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST_CASE("config hash ignores key order but tracks values") {
    Json a = {{"alpha", 1}, {"beta", {{"x", 2.5}, {"y", "z"}}}};
    Json b = {{"beta", {{"y", "z"}, {"x", 2.5}}}, {"alpha", 1}};
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);

    Json c = a;
    c["alpha"] = 2;
    CHECK(config_hash(c) != config_hash(a));
}

TEST_CASE("jsonl files carry a header line and preserve record order") {
    const std::string path = temp_path("sgqa_artifact.jsonl");
    const Json header = artifact_header("corpus", config_hash({{"n", 4}}), 42);
    std::vector<Json> records;
    for (int i = 0; i < 4; ++i) records.push_back({{"id", i}, {"payload", "r" + std::to_string(i)}});
    write_jsonl(path, header, records);

    Json back_header;
    const auto back = read_jsonl(path, &back_header);
    CHECK(back_header == header);
    CHECK(back_header["tool_version"] == std::string(kToolVersion));
    REQUIRE(back.size() == records.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == records[i]);
    std::remove(path.c_str());
}

TEST_CASE("headerless jsonl is readable and all lines become records") {
    const std::string path = temp_path("sgqa_plain.jsonl");
    {
        std::ofstream out(path);
        out << "{\"k\":1}\n\n{\"k\":2}\n";
    }
    Json header;
    const auto records = read_jsonl(path, &header);
    CHECK(header.is_null());
    REQUIRE(records.size() == 2);
    CHECK(records[1]["k"] == 2);
    std::remove(path.c_str());
}
