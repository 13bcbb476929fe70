#include "mimmu/diffusion/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mimmu::diff {

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

std::string header_line(const CheckpointMeta& meta, std::size_t n_params) {
    std::string h = "{\"version\":" + std::to_string(meta.version);
    h += ",\"arch\":{\"dim\":" + std::to_string(meta.arch.dim);
    h += ",\"hidden\":[";
    for (std::size_t i = 0; i < meta.arch.hidden.size(); ++i) {
        if (i) h += ',';
        h += std::to_string(meta.arch.hidden[i]);
    }
    h += "],\"time_embed_dim\":" + std::to_string(meta.arch.time_embed_dim);
    h += ",\"attr_embed_dim\":" + std::to_string(meta.arch.attr_embed_dim);
    h += ",\"n_a\":" + std::to_string(meta.arch.n_a);
    h += ",\"n_b\":" + std::to_string(meta.arch.n_b);
    h += "},\"schedule\":{\"kind\":\"" + json_escape(meta.schedule_kind);
    h += "\",\"T\":" + std::to_string(meta.schedule_T);
    h += "},\"param_count\":" + std::to_string(n_params);
    h += ",\"lineage\":\"" + json_escape(meta.lineage) + "\"}";
    return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const num::ParamVector& params) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f << header_line(meta, params.size()) << '\n';
    static_assert(sizeof(double) == 8);
    f.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(8 * params.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string header;
    if (!std::getline(f, header))
        throw std::runtime_error("load_checkpoint: missing header " + path);
    nlohmann::json j = nlohmann::json::parse(header);

    CheckpointMeta meta;
    meta.version = j.at("version").get<int>();
    if (meta.version != 1)
        throw std::runtime_error("load_checkpoint: unsupported version");
    const auto& a = j.at("arch");
    meta.arch.dim = a.at("dim").get<std::size_t>();
    meta.arch.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    meta.arch.time_embed_dim = a.at("time_embed_dim").get<std::size_t>();
    meta.arch.attr_embed_dim = a.at("attr_embed_dim").get<std::size_t>();
    meta.arch.n_a = a.at("n_a").get<int>();
    meta.arch.n_b = a.at("n_b").get<int>();
    const auto& s = j.at("schedule");
    meta.schedule_kind = s.at("kind").get<std::string>();
    meta.schedule_T = s.at("T").get<std::size_t>();
    meta.lineage = j.value("lineage", std::string());
    const std::size_t n = j.at("param_count").get<std::size_t>();

    DenoiserModel probe(meta.arch, 0);
    if (probe.params().size() != n)
        throw std::runtime_error(
            "load_checkpoint: param count does not match architecture");
    num::ParamVector params = probe.params();
    f.read(reinterpret_cast<char*>(params.data()),
           static_cast<std::streamsize>(8 * n));
    if (f.gcount() != static_cast<std::streamsize>(8 * n))
        throw std::runtime_error("load_checkpoint: truncated block " + path);
    char extra;
    if (f.read(&extra, 1))
        throw std::runtime_error("load_checkpoint: trailing bytes " + path);

    DenoiserModel model(meta.arch, std::move(params));
    return LoadedCheckpoint{std::move(meta), std::move(model)};
}

}  // namespace mimmu::diff
