#include "fga/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "fga/config.hpp"

namespace fga {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'A', 'W'};

void write_u32(std::ofstream& f, std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                               static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

struct Reader {
    std::ifstream f;
    std::size_t offset = 0;
    std::string path;

    void read(void* dst, std::size_t n, const char* what) {
        f.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(f.gcount()) != n) {
            throw IoError("checkpoint " + path + ": truncated while reading " + std::string(what) + " at byte " +
                          std::to_string(offset));
        }
        offset += n;
    }

    std::uint32_t u32(const char* what) {
        std::uint8_t b[4];
        read(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
};

} // namespace

void save_checkpoint(Model& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(kMagic, 4);
    write_u32(f, kCheckpointVersion);
    const std::string spec = model_spec_to_json(model.spec());
    write_u32(f, static_cast<std::uint32_t>(spec.size()));
    f.write(spec.data(), static_cast<std::streamsize>(spec.size()));
    auto params = model.named_params();
    write_u32(f, static_cast<std::uint32_t>(params.size()));
    for (auto& [name, var] : params) {
        write_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Shape& shape = var->value.shape();
        write_u32(f, static_cast<std::uint32_t>(shape.rank()));
        for (int d = 0; d < shape.rank(); ++d) write_u32(f, static_cast<std::uint32_t>(shape.dim(d)));
        f.write(reinterpret_cast<const char*>(var->value.data()),
                static_cast<std::streamsize>(var->value.size() * sizeof(double)));
    }
    if (!f) throw IoError("short write to checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.f.open(path, std::ios::binary);
    if (!r.f) throw IoError("cannot open checkpoint " + path);

    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("checkpoint " + path + ": bad magic (not an FGAW file)");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint " + path + ": unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint32_t spec_len = r.u32("spec length");
    std::string spec_json(spec_len, '\0');
    r.read(spec_json.data(), spec_len, "spec JSON");
    const ModelSpec spec = model_spec_from_json(spec_json);
    Model model(spec, 0);

    auto params = model.named_params();
    const std::uint32_t count = r.u32("tensor count");
    if (count != params.size()) {
        throw IoError("checkpoint " + path + ": has " + std::to_string(count) + " tensors, spec expects " +
                      std::to_string(params.size()));
    }
    for (auto& [name, var] : params) {
        const std::uint32_t name_len = r.u32("name length");
        std::string stored(name_len, '\0');
        r.read(stored.data(), name_len, "tensor name");
        if (stored != name) {
            throw IoError("checkpoint " + path + ": tensor '" + stored + "' where '" + name + "' was expected");
        }
        const std::uint32_t rank = r.u32("rank");
        if (rank < 1 || rank > 4) throw IoError("checkpoint " + path + ": bad rank for " + name);
        std::vector<int> dims(rank);
        for (std::uint32_t d = 0; d < rank; ++d) dims[d] = static_cast<int>(r.u32("dim"));
        if (Shape(dims) != var->value.shape()) {
            throw IoError("checkpoint " + path + ": tensor " + name + " has shape " + Shape(dims).str() +
                          ", spec expects " + var->value.shape().str());
        }
        r.read(var->value.data(), static_cast<std::size_t>(var->value.size()) * sizeof(double), "tensor data");
    }
    return model;
}

} // namespace fga
