#pragma once

#include <filesystem>
#include <string>

#include "clvid/cli/config.hpp"
#include "clvid/evalproto/experiment.hpp"
#include "clvid/videodata/clip_io.hpp"
#include "clvid/videodata/synthetic.hpp"

namespace clvid::cli {

namespace fs = std::filesystem;

inline fs::path clip_path(const fs::path& root, std::size_t class_id, std::size_t clip_id) {
    return root / ("class_" + std::to_string(class_id)) / ("clip_" + std::to_string(clip_id) + ".vclp");
}

// Writes class_<id>/clip_<id>.vclp for every configured class and clip.
// Returns the number of files written.
inline std::size_t generate_dataset(const DataConfig& data, bool force) {
    const fs::path root(data.dir);
    if (fs::exists(root) && !fs::is_directory(root)) throw ConfigError("dataset path '" + data.dir + "' is not a directory");
    if (fs::exists(root) && !fs::is_empty(root)) {
        if (!force) throw ConfigError("dataset directory '" + data.dir + "' is not empty (use --force to overwrite)");
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_directory() && entry.path().filename().string().rfind("class_", 0) == 0) fs::remove_all(entry.path());
    }
    std::size_t written = 0;
    for (std::size_t c = 0; c < data.classes; ++c) {
        fs::create_directories(root / ("class_" + std::to_string(c)));
        for (std::size_t i = 0; i < data.clips_per_class; ++i, ++written)
            video::write_clip(clip_path(root, c, i).string(), video::render_synthetic_clip(c, i, data.shape(), data.seed));
    }
    return written;
}

// Loads the configured classes and clips; labels and source ids follow the
// directory layout.
inline eval::ClipStore load_dataset(const DataConfig& data) {
    const fs::path root(data.dir);
    if (!fs::is_directory(root)) throw ConfigError("dataset directory '" + data.dir + "' does not exist (run gen-data first)");
    eval::ClipStore store;
    for (std::size_t c = 0; c < data.classes; ++c)
        for (std::size_t i = 0; i < data.clips_per_class; ++i) {
            const auto path = clip_path(root, c, i);
            if (!fs::exists(path)) throw ConfigError("missing clip file '" + path.string() + "'");
            video::Clip clip;
            try {
                clip = video::read_clip(path.string());
            } catch (const FormatError& e) {
                throw Error(path.string() + ": " + e.what());
            }
            clip.set_label(c);
            clip.set_source_id(video::synthetic_source_id(c, i));
            store.add(std::move(clip));
        }
    return store;
}

} // namespace clvid::cli
