#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "clvid/cli/config.hpp"
#include "clvid/cli/dataset.hpp"
#include "clvid/cli/report.hpp"
#include "clvid/cli/runner.hpp"
#include "clvid/diffcore/checkpoint.hpp"
#include "clvid/evalproto/aggregate.hpp"
#include "clvid/flowselect/flow.hpp"

namespace clvid::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string exp_name(std::size_t id) { return "exp_" + std::to_string(id); }

inline std::string run_log_text(const eval::RunLog& log, std::size_t experiment_id, const std::vector<std::size_t>& tasks) {
    std::string out = "experiment_id = " + std::to_string(experiment_id) + "\n";
    out += "problem_seed = " + std::to_string(log.problem_seed) + "\n";
    out += "run_seed = " + std::to_string(log.run_seed) + "\n";
    out += "config_hash = " + log.config_hash + "\n";
    out += "tasks = " + join(tasks, [](std::size_t t) { return std::to_string(t); }) + "\n";
    out += "steps = " + std::to_string(log.step_losses.size()) + "\n";
    out += "task_seconds = " + join(log.task_seconds, [](double s) { return fmt_double(s); }) + "\n";
    for (std::size_t t = 0; t < log.cil_after_task.size(); ++t)
        out += "cil_after_task_" + std::to_string(t) + " = " +
               join(log.cil_after_task[t], [](double a) { return fmt_double(a); }) + "\n";
    return out;
}

inline std::string losses_csv(const eval::RunLog& log) {
    std::string out = "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < log.step_losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, log.step_losses[i]);
        out += buf;
    }
    return out;
}

} // namespace detail

struct Problems {
    video::TaskPool pool;
    std::vector<video::ContinualProblem> problems;
};

inline Problems sample_protocol(const RunConfig& cfg, const eval::ClipStore& store) {
    auto p = cfg.protocol;
    p.clips_per_class = cfg.data.clips_per_class;
    Problems out;
    out.pool = video::build_task_pool(store.classes(), p);
    out.problems = video::sample_problems(out.pool, p);
    return out;
}

// Trains every problem under one configuration and writes the run directory:
// config.ini, report.csv, summary.txt, buffers/, models/, logs/ and, when an
// experiment aborts, failures.txt. Returns the rows of the experiments that
// finished and whether any failed.
struct CellResult {
    std::vector<ReportRow> rows;
    std::vector<JobOutcome> failures;
};

inline CellResult run_cell(const RunConfig& cfg, const eval::ClipStore& store, const Problems& problems, const fs::path& dir) {
    fs::create_directories(dir);
    for (const char* stale : {"buffers", "models", "logs"}) fs::remove_all(dir / stale);
    fs::remove(dir / "failures.txt");
    for (const char* sub : {"buffers", "models", "logs"}) fs::create_directories(dir / sub);
    detail::write_text(dir / "config.ini", serialize_config(cfg));

    const std::string hash = config_hash(cfg);
    auto job = [&](const video::ContinualProblem& problem) {
        auto result = eval::run_experiment(problem, problems.pool, store, cfg.strategy, cfg.gate, cfg.training, problem.seed);
        result.log.config_hash = hash;
        const auto name = detail::exp_name(problem.experiment_id);
        if (result.buffer) detail::write_text(dir / "buffers" / (name + ".csv"), rehearsal::buffer_dump_csv(*result.buffer));
        if (cfg.output.save_models) diff::save_checkpoint((dir / "models" / (name + ".clwb")).string(), result.model.params());
        detail::write_text(dir / "logs" / (name + ".txt"), detail::run_log_text(result.log, problem.experiment_id, problem.task_ids));
        detail::write_text(dir / "logs" / (name + "_losses.csv"), detail::losses_csv(result.log));
        return result.report;
    };
    const auto outcomes = run_jobs(problems.problems, cfg.workers, job);

    CellResult cell;
    for (const auto& o : outcomes) {
        if (o.report) cell.rows.push_back(make_row(cfg, *o.report));
        else cell.failures.push_back(o);
    }
    detail::write_text(dir / "report.csv", format_report(cell.rows));
    detail::write_text(dir / "summary.txt", cell.rows.empty() ? std::string("no experiment finished\n") : format_summary(summarize(cell.rows)));
    if (!cell.failures.empty()) {
        std::string text = "experiment_id,error\n";
        for (const auto& f : cell.failures) text += std::to_string(f.experiment_id) + "," + f.error + "\n";
        detail::write_text(dir / "failures.txt", text);
    }
    return cell;
}

inline int cmd_gen_data(const RunConfig& cfg, bool force, std::ostream& out) {
    validate_config(cfg);
    const auto n = generate_dataset(cfg.data, force);
    out << "wrote " << n << " clips (" << cfg.data.classes << " classes x " << cfg.data.clips_per_class << ") to "
        << cfg.data.dir << "\n";
    return kExitOk;
}

inline int cmd_run(RunConfig cfg, std::optional<std::size_t> workers, std::ostream& out, std::ostream& err) {
    if (workers) cfg.workers = *workers;
    validate_config(cfg);
    const auto store = load_dataset(cfg.data);
    const auto problems = sample_protocol(cfg, store);
    const auto cell = run_cell(cfg, store, problems, cfg.output.dir);
    if (!cell.rows.empty()) out << format_summary(summarize(cell.rows));
    for (const auto& f : cell.failures) err << "experiment " << f.experiment_id << " failed: " << f.error << "\n";
    if (!cell.failures.empty()) {
        err << cell.failures.size() << " experiment(s) failed; see " << (fs::path(cfg.output.dir) / "failures.txt").string()
            << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

inline std::string cell_name(std::size_t buffer, const std::optional<double>& delta, bool idd) {
    return "b" + std::to_string(buffer) + "_d" + delta_label(delta) + "_idd" + (idd ? "on" : "off");
}

// Cartesian grid over buffer size, confidence threshold and IDD. All cells
// share one sampled problem set so their comparisons are paired.
inline int cmd_sweep(RunConfig cfg, std::ostream& out, std::ostream& err) {
    validate_config(cfg);
    const auto store = load_dataset(cfg.data);
    const auto problems = sample_protocol(cfg, store);
    const fs::path root(cfg.output.dir);
    fs::create_directories(root);
    std::vector<ReportRow> all;
    std::vector<SummaryRow> summary;
    std::size_t failed = 0;
    for (auto buffer : cfg.sweep.buffers)
        for (const auto& delta : cfg.sweep.deltas)
            for (bool idd : cfg.sweep.idd) {
                RunConfig cell_cfg = cfg;
                cell_cfg.training.buffer_capacity = buffer;
                cell_cfg.gate.cdr_enabled = delta.has_value();
                if (delta) cell_cfg.gate.delta = *delta;
                cell_cfg.gate.idd_enabled = idd;
                validate_config(cell_cfg);
                const auto name = cell_name(buffer, delta, idd);
                const auto cell = run_cell(cell_cfg, store, problems, root / "cells" / name);
                all.insert(all.end(), cell.rows.begin(), cell.rows.end());
                if (!cell.rows.empty()) {
                    auto s = summarize(cell.rows);
                    summary.insert(summary.end(), s.begin(), s.end());
                }
                for (const auto& f : cell.failures)
                    err << name << ": experiment " << f.experiment_id << " failed: " << f.error << "\n";
                failed += cell.failures.size();
            }
    detail::write_text(root / "config.ini", serialize_config(cfg));
    detail::write_text(root / "report.csv", format_report(all));
    const auto text = format_summary(summary);
    detail::write_text(root / "summary.txt", text);
    out << text;
    return failed ? kExitRuntime : kExitOk;
}

inline int cmd_flow_inspect(const std::string& clip_path, std::ostream& out) {
    const auto clip = video::read_clip(clip_path);
    const auto norms = flow::transition_norms(clip, flow::FlowConfig{});
    out << "index,norm\n";
    char buf[64];
    for (std::size_t i = 0; i < norms.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i, norms[i]);
        out << buf;
    }
    return kExitOk;
}

// Prints one experiment's buffer listing, or every listing with an
// experiment_id column when no experiment is given.
inline int cmd_buffer_dump(const std::string& run_dir, std::optional<std::size_t> experiment, std::ostream& out) {
    const fs::path dir = fs::path(run_dir) / "buffers";
    if (!fs::is_directory(dir)) throw ConfigError("no buffers directory in run '" + run_dir + "'");
    if (experiment) {
        out << detail::read_text(dir / (detail::exp_name(*experiment) + ".csv"));
        return kExitOk;
    }
    std::map<std::size_t, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto stem = entry.path().stem().string();
        if (entry.path().extension() == ".csv" && stem.rfind("exp_", 0) == 0)
            files[detail::parse_size("buffer file name", stem.substr(4))] = entry.path();
    }
    out << "experiment_id," << "item_index,task_id,label,confidence,stream_index\n";
    for (const auto& [id, path] : files) {
        std::istringstream in(detail::read_text(path));
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line))
            if (!line.empty()) out << id << "," << line << "\n";
    }
    return kExitOk;
}

inline int cmd_report(const std::string& run_dir, std::ostream& out) {
    const auto rows = parse_report(detail::read_text(fs::path(run_dir) / "report.csv"));
    if (rows.empty()) throw AggregationError("report.csv in '" + run_dir + "' has no rows");
    out << format_summary(summarize(rows));
    return kExitOk;
}

} // namespace clvid::cli
