#pragma once

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "clvid/error.hpp"
#include "clvid/evalproto/experiment.hpp"
#include "clvid/videodata/synthetic.hpp"

namespace clvid::cli {

struct DataConfig {
    std::string dir = "data";
    std::size_t classes = 30;
    std::size_t clips_per_class = 130;
    std::size_t frames = 24;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t channels = 3;
    std::uint64_t seed = 1;

    video::ClipShape shape() const { return {frames, height, width, channels}; }
    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct OutputConfig {
    std::string dir = "runs/latest";
    bool save_models = true;
    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

// Grid axes for `sweep`; an absent delta means the confidence gate is off.
struct SweepConfig {
    std::vector<std::size_t> buffers{100, 200, 500};
    std::vector<std::optional<double>> deltas{std::nullopt, 0.6, 0.7, 0.8};
    std::vector<bool> idd{false, true};
    friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct RunConfig {
    DataConfig data;
    video::ProtocolConfig protocol;
    strategy::StrategyConfig strategy;
    rehearsal::GateConfig gate;
    eval::TrainingConfig training;
    OutputConfig output;
    SweepConfig sweep;
    std::size_t workers = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a nonnegative integer, found '" + v + "'");
    return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a number, found '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, found '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + f(xs[i]);
    return out;
}

struct Field {
    std::string section;
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CLVID_SIZE_FIELD(sec, name, member)                                                            \
    Field{sec, name, [](RunConfig& c, const std::string& v) { c.member = parse_size(sec "." name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}
#define CLVID_U64_FIELD(sec, name, member)                                                            \
    Field{sec, name, [](RunConfig& c, const std::string& v) { c.member = parse_u64(sec "." name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}
#define CLVID_DOUBLE_FIELD(sec, name, member)                                                            \
    Field{sec, name, [](RunConfig& c, const std::string& v) { c.member = parse_double(sec "." name, v); }, \
          [](const RunConfig& c) { return fmt_double(c.member); }}
#define CLVID_BOOL_FIELD(sec, name, member)                                                            \
    Field{sec, name, [](RunConfig& c, const std::string& v) { c.member = parse_bool(sec "." name, v); }, \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}

// Every accepted key, in serialization order.
inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"data", "dir", [](RunConfig& c, const std::string& v) { c.data.dir = v; },
              [](const RunConfig& c) { return c.data.dir; }},
        CLVID_SIZE_FIELD("data", "classes", data.classes),
        CLVID_SIZE_FIELD("data", "clips_per_class", data.clips_per_class),
        CLVID_SIZE_FIELD("data", "frames", data.frames),
        CLVID_SIZE_FIELD("data", "height", data.height),
        CLVID_SIZE_FIELD("data", "width", data.width),
        CLVID_SIZE_FIELD("data", "channels", data.channels),
        CLVID_U64_FIELD("data", "seed", data.seed),

        CLVID_SIZE_FIELD("protocol", "pool_size", protocol.pool_size),
        CLVID_SIZE_FIELD("protocol", "classes_per_task", protocol.classes_per_task),
        CLVID_SIZE_FIELD("protocol", "tasks_per_problem", protocol.tasks_per_problem),
        CLVID_SIZE_FIELD("protocol", "experiments", protocol.experiments),
        CLVID_DOUBLE_FIELD("protocol", "test_fraction", protocol.test_fraction),
        CLVID_U64_FIELD("protocol", "seed", protocol.master_seed),

        Field{"strategy", "kind", [](RunConfig& c, const std::string& v) { c.strategy.kind = strategy::parse_kind(v); },
              [](const RunConfig& c) { return std::string(strategy::to_string(c.strategy.kind)); }},
        CLVID_DOUBLE_FIELD("strategy", "alpha", strategy.alpha),
        CLVID_DOUBLE_FIELD("strategy", "beta", strategy.beta),
        CLVID_DOUBLE_FIELD("strategy", "lambda", strategy.lambda),
        CLVID_DOUBLE_FIELD("strategy", "temperature", strategy.temperature),
        CLVID_DOUBLE_FIELD("strategy", "distill_weight", strategy.distill_weight),
        CLVID_SIZE_FIELD("strategy", "replay_batch", strategy.replay_batch),
        CLVID_SIZE_FIELD("strategy", "fisher_samples", strategy.fisher_samples),

        CLVID_SIZE_FIELD("buffer", "capacity", training.buffer_capacity),

        CLVID_BOOL_FIELD("gate", "cdr", gate.cdr_enabled),
        CLVID_DOUBLE_FIELD("gate", "delta", gate.delta),
        CLVID_BOOL_FIELD("gate", "idd", gate.idd_enabled),
        CLVID_SIZE_FIELD("gate", "flow_levels", gate.flow.levels),
        CLVID_SIZE_FIELD("gate", "flow_radius", gate.flow.radius),
        CLVID_SIZE_FIELD("gate", "flow_iterations", gate.flow.iterations),
        CLVID_DOUBLE_FIELD("gate", "flow_sigma", gate.flow.sigma),
        CLVID_DOUBLE_FIELD("gate", "flow_window_sigma", gate.flow.window_sigma),

        CLVID_SIZE_FIELD("training", "epochs", training.epochs),
        CLVID_SIZE_FIELD("training", "batch_size", training.batch_size),
        Field{"training", "optimizer",
              [](RunConfig& c, const std::string& v) {
                  if (v == "sgd") c.training.optimizer = diff::OptimizerKind::sgd;
                  else if (v == "rmsprop") c.training.optimizer = diff::OptimizerKind::rmsprop;
                  else throw ConfigError("training.optimizer: expected sgd or rmsprop, found '" + v + "'");
              },
              [](const RunConfig& c) { return std::string(diff::to_string(c.training.optimizer)); }},
        CLVID_DOUBLE_FIELD("training", "lr", training.lr),
        CLVID_DOUBLE_FIELD("training", "rho", training.rho),
        CLVID_DOUBLE_FIELD("training", "eps", training.eps),
        CLVID_SIZE_FIELD("training", "hidden", training.hidden),
        CLVID_SIZE_FIELD("training", "window", training.features.window),
        CLVID_SIZE_FIELD("training", "grid", training.features.grid),
        CLVID_BOOL_FIELD("training", "per_task_eval", training.per_task_eval),
        CLVID_SIZE_FIELD("training", "workers", workers),

        Field{"output", "dir", [](RunConfig& c, const std::string& v) { c.output.dir = v; },
              [](const RunConfig& c) { return c.output.dir; }},
        CLVID_BOOL_FIELD("output", "save_models", output.save_models),

        Field{"sweep", "buffers",
              [](RunConfig& c, const std::string& v) {
                  c.sweep.buffers.clear();
                  for (const auto& s : split_list(v)) c.sweep.buffers.push_back(parse_size("sweep.buffers", s));
              },
              [](const RunConfig& c) { return join(c.sweep.buffers, [](std::size_t b) { return std::to_string(b); }); }},
        Field{"sweep", "deltas",
              [](RunConfig& c, const std::string& v) {
                  c.sweep.deltas.clear();
                  for (const auto& s : split_list(v))
                      c.sweep.deltas.push_back(s == "off" ? std::nullopt : std::optional<double>(parse_double("sweep.deltas", s)));
              },
              [](const RunConfig& c) {
                  return join(c.sweep.deltas, [](const std::optional<double>& d) { return d ? fmt_double(*d) : std::string("off"); });
              }},
        Field{"sweep", "idd",
              [](RunConfig& c, const std::string& v) {
                  c.sweep.idd.clear();
                  for (const auto& s : split_list(v)) c.sweep.idd.push_back(parse_bool("sweep.idd", s));
              },
              [](const RunConfig& c) { return join(c.sweep.idd, [](bool b) { return std::string(b ? "on" : "off"); }); }},
    };
    return table;
}

#undef CLVID_SIZE_FIELD
#undef CLVID_U64_FIELD
#undef CLVID_DOUBLE_FIELD
#undef CLVID_BOOL_FIELD

} // namespace detail

// Flat text: `[section]` headers, `key = value` lines, `#` comments.
// Unknown sections or keys are errors; missing keys keep their defaults.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, const detail::Field*> index;
    for (const auto& f : detail::fields()) index[f.section + "." + f.key] = &f;

    std::istringstream in(text);
    std::string raw, section;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
            section = detail::trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& f : detail::fields()) known = known || f.section == section;
            if (!known) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', found '" + line + "'");
        if (section.empty()) throw ConfigError(where + "key outside any section");
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto it = index.find(key);
        if (it == index.end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (auto [s, fresh] = seen.emplace(key, line_no); !fresh)
            throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(s->second) + ")");
        try {
            it->second->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return cfg;
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::string out, section;
    for (const auto& f : detail::fields()) {
        if (f.section != section) {
            out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
            section = f.section;
        }
        out += f.key + " = " + f.get(cfg) + "\n";
    }
    return out;
}

// Every field is checked before any data is touched.
inline void validate_config(const RunConfig& cfg) {
    const auto& d = cfg.data;
    if (d.classes == 0) throw ConfigError("data.classes must be positive");
    if (d.frames == 0 || d.height == 0 || d.width == 0 || d.channels == 0) throw ConfigError("data clip extents must be positive");
    if (d.classes > video::motion_table().size())
        throw ConfigError("data.classes = " + std::to_string(d.classes) + " exceeds the " +
                          std::to_string(video::motion_table().size()) + " synthetic motion classes");
    if (d.dir.empty()) throw ConfigError("data.dir must be set");
    try {
        auto p = cfg.protocol;
        p.clips_per_class = d.clips_per_class;
        p.validate(d.classes);
        if (p.experiments == 0) throw ConfigError("protocol.experiments must be positive");
    } catch (const ProtocolError& e) {
        throw ConfigError(e.what());
    }
    cfg.strategy.validate();
    cfg.gate.validate();
    cfg.training.validate();
    if (cfg.gate.idd_enabled && std::min(d.height, d.width) < flow::detail::kMinFlowSide)
        throw ConfigError("IDD needs frames of at least " + std::to_string(flow::detail::kMinFlowSide) + " pixels per side");
    if (cfg.gate.idd_enabled && d.frames < cfg.training.features.window)
        throw ConfigError("IDD selects " + std::to_string(cfg.training.features.window) + " frames but clips have only " +
                          std::to_string(d.frames));
    if (strategy::is_rehearsal(cfg.strategy.kind) && cfg.training.buffer_capacity == 0)
        throw ConfigError("buffer.capacity must be positive for rehearsal strategies");
    if (cfg.workers == 0) throw ConfigError("training.workers must be positive");
    if (cfg.output.dir.empty()) throw ConfigError("output.dir must be set");
    if (cfg.sweep.buffers.empty() || cfg.sweep.deltas.empty() || cfg.sweep.idd.empty())
        throw ConfigError("sweep axes must not be empty");
    for (const auto& delta : cfg.sweep.deltas)
        if (delta && !(*delta > 0.0 && *delta < 1.0)) throw ConfigError("sweep.deltas entries must lie in (0, 1) or be 'off'");
}

// Reads a config file. Relative paths are taken relative to the file's
// directory; CLB_SEED, when set, replaces the master seed.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg = parse_config(ss.str());
    const auto base = std::filesystem::path(path).parent_path();
    for (auto* dir : {&cfg.data.dir, &cfg.output.dir})
        if (std::filesystem::path(*dir).is_relative()) *dir = (base / *dir).lexically_normal().string();
    if (const char* env = std::getenv("CLB_SEED")) cfg.protocol.master_seed = detail::parse_u64("CLB_SEED", detail::trim(env));
    return cfg;
}

// 64-bit FNV-1a over the serialized config, as 16 hex digits.
inline std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(cfg)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace clvid::cli
