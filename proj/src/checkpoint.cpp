#include "tdpg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace tdpg {

namespace {

constexpr char kMagic[4] = {'T', 'D', 'P', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ContractViolation("checkpoint: truncated file while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is, const std::string& what) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ContractViolation("checkpoint: truncated file while reading " + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& blocks) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ContractViolation("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& [name, t] : blocks) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
        for (double v : t.values()) put_f64(os, v);
    }
    if (!os) throw ContractViolation("checkpoint: write failure on '" + path + "'");
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractViolation("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ContractViolation("checkpoint: '" + path + "' has no TDPG magic");
    const std::uint32_t version = get_u32(is, "version");
    if (version != kVersion)
        throw ContractViolation("checkpoint: unsupported format version " +
                                std::to_string(version));
    const std::uint32_t count = get_u32(is, "block count");
    std::vector<std::pair<std::string, Tensor>> blocks;
    blocks.reserve(count);
    for (std::uint32_t bi = 0; bi < count; ++bi) {
        const std::uint32_t name_len = get_u32(is, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw ContractViolation("checkpoint: truncated block name");
        const std::uint32_t rank = get_u32(is, "rank of '" + name + "'");
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d)
            shape[d] = get_u32(is, "extent of '" + name + "'");
        std::vector<double> values(numel(shape));
        for (double& v : values) v = get_f64(is, "payload of '" + name + "'");
        blocks.emplace_back(name, Tensor::from_values(shape, std::move(values)));
    }
    return blocks;
}

void assign_blocks(const std::vector<std::pair<std::string, Tensor>>& dest,
                   const std::vector<std::pair<std::string, Tensor>>& loaded) {
    std::map<std::string, Tensor> by_name;
    for (const auto& [name, t] : loaded) by_name.emplace(name, t);
    for (const auto& [name, t] : dest) {
        auto it = by_name.find(name);
        require(it != by_name.end(), "checkpoint: missing block '" + name + "'");
        require(it->second.shape() == t.shape(),
                "checkpoint: block '" + name + "' has shape " + shape_str(it->second.shape()) +
                    ", expected " + shape_str(t.shape()));
        Tensor d = t;
        d.values() = it->second.values();
    }
}

}  // namespace tdpg
