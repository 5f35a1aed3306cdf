#include "betaunc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "betaunc/binary_io.hpp"
#include "betaunc/errors.hpp"
#include "json.hpp"

namespace betaunc {

namespace {

constexpr char kMagic[4] = {'B', 'G', 'C', '1'};

[[noreturn]] void corrupt(const std::string& what) { throw DataError(DataErrorCode::CorruptCheckpoint, what); }

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);

    nlohmann::ordered_json header;
    header["spec"] = nlohmann::ordered_json::parse(model.spec().to_json());
    header["model"] = {{"seed", model.seed()},
                       {"bn_momentum", model.options().bn_momentum},
                       {"bn_eps", model.options().bn_eps}};
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : model.config_echo()) cfg[k] = v;
    header["training"] = {{"step_count", model.optimizer().step_count}, {"config", cfg}};
    w.str(header.dump());

    const auto tensors = model.named_tensors();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.str(t.name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.u32(d);
        for (float v : t.data) w.f32(v);
    }
    return w.take();
}

Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, DataErrorCode::CorruptCheckpoint);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) corrupt("bad magic bytes");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw DataError(DataErrorCode::UnsupportedVersion,
                        "checkpoint format_version " + std::to_string(version) + " (supported: " +
                            std::to_string(kCheckpointVersion) + ")");
    }

    nlohmann::json header;
    ArchitectureSpec spec;
    ModelOptions options;
    std::uint64_t seed = 0;
    std::uint64_t step_count = 0;
    std::map<std::string, std::string> config;
    try {
        header = nlohmann::json::parse(r.str());
        spec = ArchitectureSpec::from_json(header.at("spec").dump());
        const auto& m = header.at("model");
        seed = m.at("seed").get<std::uint64_t>();
        options.bn_momentum = m.at("bn_momentum").get<double>();
        options.bn_eps = m.at("bn_eps").get<double>();
        const auto& tr = header.at("training");
        step_count = tr.at("step_count").get<std::uint64_t>();
        for (const auto& [k, v] : tr.at("config").items()) config[k] = v.get<std::string>();
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        corrupt(std::string("unreadable header: ") + e.what());
    }

    const std::uint32_t count = r.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.str();
        const std::uint32_t rank = r.u32();
        if (rank > 8) corrupt("implausible tensor rank for '" + t.name + "'");
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.shape.push_back(r.u32());
            n *= t.shape.back();
        }
        if (n * 4 > r.remaining()) corrupt("truncated payload for '" + t.name + "'");
        t.data.resize(n);
        for (auto& v : t.data) v = r.f32();
        tensors.push_back(std::move(t));
    }
    if (r.remaining() != 0) corrupt("trailing bytes after last entry");

    Model model(spec, seed, options);
    try {
        model.load_named_tensors(tensors);
    } catch (const ContractViolation& e) {
        throw DataError(DataErrorCode::ShapeMismatch, e.what());
    }
    model.optimizer().step_count = step_count;
    model.config_echo() = std::move(config);
    return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    write_file_bytes(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace betaunc
