#include "ramseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace ramseg {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr char kTensorMagic[4] = {'R', 'T', 'E', 'N'};

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_tensor_body(std::ostream& os, const Tensor& t) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape()) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor read_tensor_body(std::istream& is) {
    const uint32_t rank = read_pod<uint32_t>(is);
    if (rank > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
    std::vector<int> shape;
    for (uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<int>(read_pod<uint64_t>(is)));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor payload");
    return t;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<TensorRef>& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, 1);
    write_pod<uint64_t>(os, entries.size());
    for (const TensorRef& e : entries) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_tensor_body(os, *e.tensor);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<TensorRef>& entries) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    const uint32_t version = read_pod<uint32_t>(is);
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    const uint64_t count = read_pod<uint64_t>(is);

    std::map<std::string, Tensor> loaded;
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t len = read_pod<uint32_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        loaded.emplace(std::move(name), read_tensor_body(is));
    }

    for (const TensorRef& e : entries) {
        auto it = loaded.find(e.name);
        if (it == loaded.end())
            throw std::runtime_error("checkpoint: missing tensor '" + e.name + "' in " + path.string());
        if (it->second.shape() != e.tensor->shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + e.name + "'");
        *e.tensor = it->second;
    }
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(kTensorMagic, sizeof(kTensorMagic));
    write_tensor_body(os, t);
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

Tensor read_tensor_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kTensorMagic, sizeof(kTensorMagic)) != 0)
        throw std::runtime_error("bad tensor file magic in " + path.string());
    return read_tensor_body(is);
}

}  // namespace ramseg
