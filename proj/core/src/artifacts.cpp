#include "sgqa/artifacts.hpp"

#include <fstream>
#include <sstream>

#include "sgqa/rng.hpp"

namespace sgqa {

std::string config_hash(const Json& config) {
    const nlohmann::json sorted = config;  // plain json sorts object keys
    const std::string dump = sorted.dump();
    const uint64_t h = fnv1a(dump);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json artifact_header(const std::string& kind, const std::string& cfg_hash,
                     uint64_t seed) {
    Json header;
    header["artifact"] = kind;
    header["config_hash"] = cfg_hash;
    header["seed"] = seed;
    header["tool_version"] = std::string(kToolVersion);
    return header;
}

void write_jsonl(const std::string& path, const Json& header,
                 const std::vector<Json>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw MalformedDocument("cannot open " + path + " for writing");
    out << header.dump() << "\n";
    for (const Json& record : records) out << record.dump() << "\n";
    if (!out) throw MalformedDocument("short write to " + path);
}

std::vector<Json> read_jsonl(const std::string& path, Json* header) {
    std::ifstream in(path);
    if (!in) throw MalformedDocument("cannot open " + path);
    std::vector<Json> records;
    std::string line;
    bool first = true;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json doc;
        try {
            doc = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw MalformedDocument(path + ":" + std::to_string(line_no) + ": " +
                                    e.what());
        }
        if (first) {
            first = false;
            if (doc.is_object() && doc.contains("artifact")) {
                if (header != nullptr) *header = doc;
                continue;
            }
        }
        records.push_back(std::move(doc));
    }
    return records;
}

void save_json_file(const std::string& path, const Json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw MalformedDocument("cannot open " + path + " for writing");
    out << doc.dump(2) << "\n";
    if (!out) throw MalformedDocument("short write to " + path);
}

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedDocument("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return Json::parse(buffer.str());
    } catch (const Json::parse_error& e) {
        throw MalformedDocument(path + ": " + e.what());
    }
}

}  // namespace sgqa
