#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "clvid/binary_io.hpp"
#include "clvid/videodata/clip.hpp"

namespace clvid::video {

// Clip file layout:
//   "VCLP" | version u8 = 1 | dtype u8 = 0 (uint8) | u32 LE frames, height, width, channels | raw bytes
inline constexpr std::uint8_t kClipVersion = 1;
inline constexpr std::uint8_t kClipDtypeU8 = 0;
inline constexpr std::size_t kClipHeaderBytes = 4 + 1 + 1 + 4 * 4;

inline std::vector<std::uint8_t> encode_clip(const Clip& clip) {
    const auto& s = clip.shape();
    for (auto e : {s.frames, s.height, s.width, s.channels})
        if (e > std::numeric_limits<std::uint32_t>::max()) throw RangeError("clip extent exceeds u32");
    std::vector<std::uint8_t> out{'V', 'C', 'L', 'P'};
    out.reserve(kClipHeaderBytes + s.total_bytes());
    io::put_u8(out, kClipVersion);
    io::put_u8(out, kClipDtypeU8);
    for (auto e : {s.frames, s.height, s.width, s.channels}) io::put_u32(out, static_cast<std::uint32_t>(e));
    out.insert(out.end(), clip.pixels().begin(), clip.pixels().end());
    return out;
}

inline Clip decode_clip(const std::vector<std::uint8_t>& bytes) {
    io::Reader r(bytes, "clip");
    if (bytes.size() < 4) throw FormatError("clip: file shorter than magic", 0);
    if (r.str(4, "magic") != "VCLP") throw FormatError("clip: bad magic", 0);
    const auto version = r.u8("version");
    if (version != kClipVersion) throw FormatError("clip: unsupported version " + std::to_string(version), 4);
    const auto dtype = r.u8("dtype");
    if (dtype != kClipDtypeU8) throw FormatError("clip: unsupported dtype " + std::to_string(dtype), 5);

    ClipShape s;
    std::size_t* extents[] = {&s.frames, &s.height, &s.width, &s.channels};
    const char* names[] = {"frame count", "height", "width", "channels"};
    std::uint64_t total = 1;
    for (int i = 0; i < 4; ++i) {
        const std::size_t at = r.offset();
        const auto e = r.u32(names[i]);
        if (e == 0) throw FormatError(std::string("clip: zero ") + names[i], at);
        if (total > std::numeric_limits<std::uint64_t>::max() / e)
            throw FormatError("clip: extents overflow the payload size", at);
        total *= e;
        *extents[i] = e;
    }
    if (r.remaining() < total)
        throw FormatError("clip: truncated payload, expected " + std::to_string(total) + " bytes, found " +
                              std::to_string(r.remaining()),
                          r.offset());
    if (r.remaining() > total)
        throw FormatError("clip: " + std::to_string(r.remaining() - total) + " trailing bytes after payload",
                          r.offset() + total);
    const std::uint8_t* p = r.take(total, "payload");
    return Clip(s, std::vector<std::uint8_t>(p, p + total));
}

inline void write_clip(const std::string& path, const Clip& clip) { io::write_file(path, encode_clip(clip)); }

inline Clip read_clip(const std::string& path) { return decode_clip(io::read_file(path)); }

} // namespace clvid::video
