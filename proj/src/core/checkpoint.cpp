#include "tailaug/core/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "tailaug/core/errors.hpp"

namespace tailaug {

namespace {
constexpr char kMagic[8] = {'T', 'A', 'U', 'G', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("checkpoint truncated");
    return v;
}
}  // namespace

void write_checkpoint(const std::string& path, const nlohmann::json& manifest, const ParamSet& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    std::string m = manifest.dump();
    write_pod(out, static_cast<uint64_t>(m.size()));
    out.write(m.data(), static_cast<std::streamsize>(m.size()));
    write_pod(out, static_cast<uint32_t>(params.all().size()));
    for (const auto& p : params.all()) {
        write_pod(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod(out, static_cast<int32_t>(p->value.rows));
        write_pod(out, static_cast<int32_t>(p->value.cols));
        out.write(reinterpret_cast<const char*>(p->value.data.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.data.size()));
    }
    if (!out) throw IoError("write failed for checkpoint " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError("not a tailaug checkpoint: " + path);
    uint32_t version = read_pod<uint32_t>(in);
    if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
    uint64_t mlen = read_pod<uint64_t>(in);
    std::string m(mlen, '\0');
    in.read(m.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw ParseError("checkpoint truncated");
    Checkpoint ckpt;
    try {
        ckpt.manifest = nlohmann::json::parse(m);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint manifest: ") + e.what());
    }
    uint32_t count = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nlen = read_pod<uint32_t>(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        int32_t rows = read_pod<int32_t>(in);
        int32_t cols = read_pod<int32_t>(in);
        Tensor t(rows, cols);
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(sizeof(double) * t.data.size()));
        if (!in) throw ParseError("checkpoint truncated in tensor " + name);
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

void load_params(const Checkpoint& ckpt, ParamSet& params) {
    for (const auto& p : params.all()) {
        auto it = ckpt.tensors.find(p->name);
        if (it == ckpt.tensors.end()) throw ParseError("checkpoint missing tensor " + p->name);
        if (!it->second.same_shape(p->value))
            throw ParseError("checkpoint tensor " + p->name + " has mismatched shape");
        p->value = it->second;
    }
}

}  // namespace tailaug
