#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "clvid/binary_io.hpp"
#include "clvid/diffcore/model.hpp"

namespace clvid::diff {

// Parameter checkpoint layout (all integers little-endian):
//   "CLWB" | version u8 | { name_len u16 | name | rank u8 | extents u32[rank] | f64[prod(extents)] }*
inline constexpr std::uint8_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> encode_checkpoint(const ParamVector& params) {
    std::vector<std::uint8_t> out{'C', 'L', 'W', 'B'};
    io::put_u8(out, kCheckpointVersion);
    for (std::size_t i = 0; i < params.count(); ++i) {
        const auto& name = params.name(i);
        const auto& t = params[i].value();
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("parameter name too long");
        if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw ConfigError("tensor rank too large");
        io::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        io::put_u8(out, static_cast<std::uint8_t>(t.rank()));
        for (auto e : t.shape()) io::put_u32(out, static_cast<std::uint32_t>(e));
        for (double v : t.data()) io::put_f64(out, v);
    }
    return out;
}

inline std::vector<std::pair<std::string, Tensor>> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    io::Reader r(bytes, "checkpoint");
    if (r.str(4, "magic") != "CLWB") throw FormatError("checkpoint: bad magic", 0);
    const auto version = r.u8("version");
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version), 4);
    std::vector<std::pair<std::string, Tensor>> out;
    while (!r.at_end()) {
        const auto len = r.u16("name length");
        std::string name = r.str(len, "name");
        const auto rank = r.u8("rank");
        Shape shape;
        std::uint64_t count = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const std::size_t at = r.offset();
            const auto e = r.u32("extent");
            if (e == 0) throw FormatError("checkpoint: zero extent in '" + name + "'", at);
            count *= e;
            if (count > r.remaining()) throw FormatError("checkpoint: extents of '" + name + "' exceed file size", at);
            shape.push_back(e);
        }
        r.need(count * 8, "tensor payload");
        std::vector<double> data(count);
        for (auto& v : data) v = r.f64("tensor payload");
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

inline void save_checkpoint(const std::string& path, const ParamVector& params) {
    io::write_file(path, encode_checkpoint(params));
}

// Loads values by name into an existing parameter set; shapes must agree.
inline void load_checkpoint(const std::string& path, ParamVector& params) {
    auto entries = decode_checkpoint(io::read_file(path));
    if (entries.size() != params.count()) throw ConfigError("checkpoint tensor count does not match model");
    for (std::size_t i = 0; i < params.count(); ++i) {
        auto& [name, t] = entries[i];
        if (name != params.name(i) || t.shape() != params[i].shape())
            throw ConfigError("checkpoint entry '" + name + "' does not match parameter '" + params.name(i) + "'");
        params[i].mutable_value() = std::move(t);
    }
}

} // namespace clvid::diff
