#include "sgqa/weights_io.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sgqa {
namespace {

using Json = nlohmann::ordered_json;

void put_u32(std::ostream& out, uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

uint32_t take_u32(std::istream& in, const std::string& what) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw MalformedDocument("weights file truncated reading " + what);
    return static_cast<uint32_t>(buf[0]) | static_cast<uint32_t>(buf[1]) << 8 |
           static_cast<uint32_t>(buf[2]) << 16 | static_cast<uint32_t>(buf[3]) << 24;
}

}  // namespace

void save_weights(const ParamStore& params, const std::string& path, const Json& header) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MalformedDocument("cannot open " + path + " for writing");
    out.write(kWeightsMagic, 8);
    put_u32(out, kWeightsVersion);
    const auto names = params.names();
    put_u32(out, static_cast<uint32_t>(names.size()));

    Json sidecar;
    if (!header.is_null()) sidecar["header"] = header;
    sidecar["version"] = kWeightsVersion;
    sidecar["blocks"] = Json::array();
    for (const std::string& name : names) {
        const Mat& m = params.get(name);
        put_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<uint32_t>(m.rows()));
        put_u32(out, static_cast<uint32_t>(m.cols()));
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) {
                const double v = m(i, j);
                char buf[8];
                std::memcpy(buf, &v, 8);
                out.write(buf, 8);
            }
        }
        sidecar["blocks"].push_back(
            {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    }
    if (!out) throw MalformedDocument("short write to " + path);
    out.close();

    std::ofstream side(path + ".json", std::ios::trunc);
    side << sidecar.dump(2) << "\n";
}

void load_weights(ParamStore& params, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedDocument("cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kWeightsMagic, 8) != 0)
        throw MalformedDocument(path + " is not a weights file");
    const uint32_t version = take_u32(in, "version");
    if (version != kWeightsVersion)
        throw MalformedDocument("unsupported weights version " + std::to_string(version));
    const uint32_t count = take_u32(in, "block count");
    const bool fresh = params.size() == 0;
    if (!fresh && params.size() != count)
        throw MalformedDocument("weights file has " + std::to_string(count) +
                                " blocks, store has " + std::to_string(params.size()));
    for (uint32_t b = 0; b < count; ++b) {
        const uint32_t name_len = take_u32(in, "name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len))
            throw MalformedDocument("weights file truncated reading a block name");
        const uint32_t rows = take_u32(in, "rows");
        const uint32_t cols = take_u32(in, "cols");
        Mat* target;
        if (fresh) {
            target = &params.create(name, static_cast<int>(rows), static_cast<int>(cols));
        } else {
            if (!params.has(name))
                throw MalformedDocument("unexpected block \"" + name + "\" in " + path);
            target = &params.get(name);
            if (target->rows() != static_cast<int>(rows) ||
                target->cols() != static_cast<int>(cols))
                throw MalformedDocument("block \"" + name + "\" shape mismatch");
        }
        for (uint32_t i = 0; i < rows; ++i) {
            for (uint32_t j = 0; j < cols; ++j) {
                char buf[8];
                if (!in.read(buf, 8))
                    throw MalformedDocument("weights file truncated in block \"" + name + "\"");
                double v;
                std::memcpy(&v, buf, 8);
                (*target)(static_cast<int>(i), static_cast<int>(j)) = v;
            }
        }
    }
}

}  // namespace sgqa
