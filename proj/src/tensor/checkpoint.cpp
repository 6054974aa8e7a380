#include "map2seq/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "map2seq/errors.hpp"

namespace map2seq::tensor {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(sizeof(float) == 4);

namespace {

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
    return v;
}

json read_manifest(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint manifest " + path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != kCheckpointFormat)
        throw SchemaError(path.string() + ": not a checkpoint manifest");
    if (manifest.value("version", -1) != kCheckpointVersion)
        throw SchemaError(path.string() + ": unsupported checkpoint version " +
                          manifest.value("version", json(-1)).dump());
    return manifest;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParameterStore<float>& params, const json& meta) {
    fs::create_directories(dir);
    json tensors = json::array();
    std::vector<char> blob;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params.tensors()[i];
        tensors.push_back({{"name", params.names()[i]},
                           {"shape", {t.rows(), t.cols()}},
                           {"dtype", "float32"},
                           {"offset", blob.size()}});
        for (float v : t.data()) {
            const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(v));
            char bytes[4];
            std::memcpy(bytes, &le, 4);
            blob.insert(blob.end(), bytes, bytes + 4);
        }
    }
    json manifest = {{"format", kCheckpointFormat},
                     {"version", kCheckpointVersion},
                     {"blob", "weights.bin"},
                     {"blob_bytes", blob.size()},
                     {"tensors", tensors},
                     {"meta", meta}};
    {
        std::ofstream out(dir / "weights.bin", std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw IoError("cannot write " + (dir / "weights.bin").string());
    }
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
}

json read_checkpoint_meta(const fs::path& dir) {
    return read_manifest(dir).value("meta", json::object());
}

void load_checkpoint(const fs::path& dir, ParameterStore<float>& params) {
    const json manifest = read_manifest(dir);
    const fs::path blob_path = dir / manifest.value("blob", std::string("weights.bin"));
    std::ifstream in(blob_path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint blob " + blob_path.string());
    std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() != manifest.value("blob_bytes", std::size_t{0}))
        throw SchemaError(blob_path.string() + ": blob size does not match manifest");

    std::size_t matched = 0;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name");
        if (!params.contains(name)) throw SchemaError("checkpoint has unexpected parameter '" + name + "'");
        if (entry.at("dtype") != "float32") throw SchemaError("parameter '" + name + "' is not float32");
        Tensor<float> t = params.get(name);
        const std::size_t rows = entry.at("shape").at(0), cols = entry.at("shape").at(1);
        if (rows != t.rows() || cols != t.cols())
            throw ShapeError("parameter '" + name + "' has shape (" + std::to_string(rows) + "x" +
                             std::to_string(cols) + ") in checkpoint but " + t.shape_str() + " in model");
        const std::size_t offset = entry.at("offset");
        if (offset + 4 * t.size() > blob.size()) throw SchemaError("parameter '" + name + "' runs past the blob");
        auto out = t.data();
        for (std::size_t k = 0; k < out.size(); ++k) {
            std::uint32_t le;
            std::memcpy(&le, blob.data() + offset + 4 * k, 4);
            out[k] = std::bit_cast<float>(to_le(le));
        }
        ++matched;
    }
    if (matched != params.size()) throw SchemaError("checkpoint is missing parameters of this model");
}

}  // namespace map2seq::tensor
