#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "clvid/evalproto/experiment.hpp"

namespace clvid::cli {

struct JobOutcome {
    std::size_t experiment_id = 0;
    std::optional<eval::EvalReport> report;
    std::string error;   // empty on success
};

using Job = std::function<eval::EvalReport(const video::ContinualProblem&)>;

// Runs one job per problem on up to `workers` threads. Each job owns its
// model, buffer and RNG streams; outcomes come back in problem order.
inline std::vector<JobOutcome> run_jobs(const std::vector<video::ContinualProblem>& problems, std::size_t workers,
                                        const Job& job) {
    std::vector<JobOutcome> outcomes(problems.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < problems.size(); i = next++) {
            auto& out = outcomes[i];
            out.experiment_id = problems[i].experiment_id;
            try {
                out.report = job(problems[i]);
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, problems.size()));
    if (n == 1) {
        worker();
        return outcomes;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return outcomes;
}

} // namespace clvid::cli
