#include "prefflow/flow/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "prefflow/common/util.hpp"

namespace prefflow::flow {

namespace {
constexpr char kMagic[4] = {'P', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

std::filesystem::path bin_path(const std::filesystem::path& base) {
    auto p = base;
    p += ".bin";
    return p;
}
std::filesystem::path json_path(const std::filesystem::path& base) {
    auto p = base;
    p += ".json";
    return p;
}
std::filesystem::path grpo_path(const std::filesystem::path& base) {
    auto p = base;
    p += ".grpo.json";
    return p;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& base, const MlpField& field) {
    if (base.has_parent_path()) ensure_dir(base.parent_path());
    std::ofstream bin(bin_path(base), std::ios::binary | std::ios::trunc);
    if (!bin) throw FlowError("cannot write checkpoint blob: " + bin_path(base).string());
    bin.write(kMagic, 4);
    const uint32_t version = kVersion;
    bin.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t count = field.param_count();
    bin.write(reinterpret_cast<const char*>(&count), sizeof(count));
    bin.write(reinterpret_cast<const char*>(field.params().data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    if (!bin) throw FlowError("checkpoint blob write failed: " + bin_path(base).string());
    bin.close();

    nlohmann::json sidecar{
        {"format_version", kVersion},
        {"params_file", bin_path(base).filename().string()},
        {"param_count", count},
        {"activation", "tanh"},
        {"time_embedding", "t_sin_cos"},
        {"architecture",
         {{"dim", field.arch().dim},
          {"cond_dim", field.arch().cond_dim},
          {"hidden", field.arch().hidden}}},
    };
    write_text_file(json_path(base), sidecar.dump(2) + "\n");
}

MlpField load_checkpoint(const std::filesystem::path& base) {
    if (!std::filesystem::exists(json_path(base)))
        throw FlowError("checkpoint sidecar not found: " + json_path(base).string());
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_text_file(json_path(base)));
    } catch (const nlohmann::json::exception& e) {
        throw FlowError("bad checkpoint sidecar " + json_path(base).string() + ": " + e.what());
    }
    if (sidecar.value("format_version", 0u) != kVersion)
        throw FlowError("unsupported checkpoint version in " + json_path(base).string());

    MlpArch arch;
    try {
        const auto& a = sidecar.at("architecture");
        arch.dim = a.at("dim").get<size_t>();
        arch.cond_dim = a.at("cond_dim").get<size_t>();
        arch.hidden = a.at("hidden").get<std::vector<size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw FlowError("bad checkpoint architecture in " + json_path(base).string() + ": " +
                        e.what());
    }
    MlpField field(arch);

    std::ifstream bin(bin_path(base), std::ios::binary);
    if (!bin) throw FlowError("cannot read checkpoint blob: " + bin_path(base).string());
    char magic[4];
    bin.read(magic, 4);
    if (!bin || std::memcmp(magic, kMagic, 4) != 0)
        throw FlowError("bad checkpoint magic in " + bin_path(base).string());
    uint32_t version = 0;
    bin.read(reinterpret_cast<char*>(&version), sizeof(version));
    uint64_t count = 0;
    bin.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!bin || version != kVersion)
        throw FlowError("unsupported checkpoint blob version in " + bin_path(base).string());
    if (count != field.param_count())
        throw FlowError("checkpoint parameter count mismatch: blob has " + std::to_string(count) +
                        ", architecture needs " + std::to_string(field.param_count()));
    std::vector<double> params(count);
    bin.read(reinterpret_cast<char*>(params.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!bin) throw FlowError("truncated checkpoint blob: " + bin_path(base).string());
    field.set_params(params);
    return field;
}

void save_grpo_state(const std::filesystem::path& base, const GrpoState& state) {
    nlohmann::json doc{{"iterations", state.iterations}, {"seed", state.seed}};
    write_text_file(grpo_path(base), doc.dump(2) + "\n");
}

std::optional<GrpoState> load_grpo_state(const std::filesystem::path& base) {
    if (!std::filesystem::exists(grpo_path(base))) return std::nullopt;
    try {
        auto doc = nlohmann::json::parse(read_text_file(grpo_path(base)));
        GrpoState state;
        state.iterations = doc.at("iterations").get<size_t>();
        state.seed = doc.at("seed").get<uint64_t>();
        return state;
    } catch (const nlohmann::json::exception& e) {
        throw FlowError("bad grpo sidecar " + grpo_path(base).string() + ": " + e.what());
    }
}

}  // namespace prefflow::flow
