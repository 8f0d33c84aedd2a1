#include "gcsd/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gcsd/errors.hpp"

namespace gcsd {

using json = nlohmann::json;

namespace {
constexpr char kMagic[4] = {'G', 'C', 'K', 'P'};
constexpr const char* kVersion = "gcsd-ckpt-v1";
}  // namespace

std::string stage_name(TrainStage s) {
    switch (s) {
        case TrainStage::SimSFT: return "sim_sft";
        case TrainStage::RealSFT: return "real_sft";
        case TrainStage::MRPO: return "mrpo";
    }
    return "unknown";
}

TrainStage stage_from_name(const std::string& name) {
    if (name == "sim_sft") return TrainStage::SimSFT;
    if (name == "real_sft") return TrainStage::RealSFT;
    if (name == "mrpo") return TrainStage::MRPO;
    throw SchemaError("unknown stage " + name);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    auto& model = const_cast<ModelParams&>(ckpt.model);
    auto& net = const_cast<SoftPromptNetParams&>(ckpt.softnet);
    std::vector<ParamRef> refs = param_refs(model);
    for (const auto& r : param_refs(net)) refs.push_back(r);

    json header;
    header["version"] = kVersion;
    header["config"] = {
        {"d_model", ckpt.model.cfg.d_model},   {"n_layers", ckpt.model.cfg.n_layers},
        {"n_heads", ckpt.model.cfg.n_heads},   {"d_ff", ckpt.model.cfg.d_ff},
        {"max_seq", ckpt.model.cfg.max_seq},   {"vocab_size", ckpt.model.cfg.vocab_size},
        {"init_seed", ckpt.model.cfg.init_seed}};
    header["softnet"] = {{"d_in", ckpt.softnet.d_in()},
                         {"h1", ckpt.softnet.w1.cols},
                         {"h2", ckpt.softnet.w2.cols},
                         {"d_prompt", ckpt.softnet.d_prompt()}};
    header["vocab"] = json::parse(ckpt.vocab.to_json());
    json tensors = json::array();
    for (const auto& r : refs)
        tensors.push_back({{"name", r.name}, {"rows", r.tensor->rows}, {"cols", r.tensor->cols}});
    header["tensors"] = std::move(tensors);
    header["meta"] = {{"stage", stage_name(ckpt.meta.stage)},
                      {"step", ckpt.meta.step},
                      {"config_hash", ckpt.meta.config_hash},
                      {"metrics", json::parse(ckpt.meta.metrics_json, nullptr, false).is_discarded()
                                      ? json::object()
                                      : json::parse(ckpt.meta.metrics_json)},
                      {"lineage", ckpt.meta.lineage}};
    std::string header_text = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f.write(kMagic, 4);
    uint32_t len = static_cast<uint32_t>(header_text.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    std::vector<float> buf;
    for (const auto& r : refs) {
        buf.resize(r.tensor->v.size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(r.tensor->v[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!f) throw DataError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) throw SchemaError("not a gcsd checkpoint");
    uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string header_text(len, '\0');
    f.read(header_text.data(), len);
    if (!f) throw SchemaError("truncated checkpoint header");
    json header = json::parse(header_text, nullptr, false);
    if (header.is_discarded() || header.value("version", "") != kVersion)
        throw SchemaError("bad checkpoint version");

    Checkpoint ckpt;
    const auto& jc = header["config"];
    ckpt.model.cfg.d_model = jc["d_model"].get<int>();
    ckpt.model.cfg.n_layers = jc["n_layers"].get<int>();
    ckpt.model.cfg.n_heads = jc["n_heads"].get<int>();
    ckpt.model.cfg.d_ff = jc["d_ff"].get<int>();
    ckpt.model.cfg.max_seq = jc["max_seq"].get<int>();
    ckpt.model.cfg.vocab_size = jc["vocab_size"].get<int>();
    ckpt.model.cfg.init_seed = jc["init_seed"].get<uint64_t>();
    ckpt.model = init_model(ckpt.model.cfg);  // allocates the right shapes

    const auto& jn = header["softnet"];
    ckpt.softnet = init_softprompt_net(jn["d_in"].get<int>(), jn["h1"].get<int>(),
                                       jn["h2"].get<int>(), jn["d_prompt"].get<int>(), 0);

    ckpt.vocab = Vocab::from_json(header["vocab"].dump());

    const auto& jm = header["meta"];
    ckpt.meta.stage = stage_from_name(jm["stage"].get<std::string>());
    ckpt.meta.step = jm["step"].get<int64_t>();
    ckpt.meta.config_hash = jm["config_hash"].get<uint64_t>();
    ckpt.meta.metrics_json = jm["metrics"].dump();
    ckpt.meta.lineage = jm.value("lineage", "");

    std::vector<ParamRef> refs = param_refs(ckpt.model);
    for (const auto& r : param_refs(ckpt.softnet)) refs.push_back(r);
    if (header["tensors"].size() != refs.size()) throw SchemaError("tensor table size mismatch");
    std::vector<float> buf;
    for (size_t i = 0; i < refs.size(); ++i) {
        const auto& jt = header["tensors"][i];
        if (jt["name"].get<std::string>() != refs[i].name ||
            jt["rows"].get<int>() != refs[i].tensor->rows ||
            jt["cols"].get<int>() != refs[i].tensor->cols)
            throw SchemaError("tensor table entry " + refs[i].name);
        buf.resize(refs[i].tensor->v.size());
        f.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!f) throw SchemaError("truncated tensor data at " + refs[i].name);
        for (size_t j = 0; j < buf.size(); ++j) refs[i].tensor->v[j] = static_cast<double>(buf[j]);
    }
    return ckpt;
}

}  // namespace gcsd
