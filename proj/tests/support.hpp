#pragma once

#include <ebr/ebr.hpp>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

namespace testing {

using namespace ebr;

inline std::string random_text(Rng& rng, int max_words = 8) {
    static const std::vector<std::string> words = {"alpha", "Beta", "gamma", "δέλτα", "x=3", "####", "\"quoted\"",
                                                   "tab\there", "line\nbreak", "42", "-7.5", "émoji🙂"};
    std::string s;
    const int n = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_words)));
    for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += words[rng.index(words.size())];
    }
    return s;
}

/// Valid pools with every optional field exercised.
inline std::vector<CandidatePool> random_pools(Rng& rng, int n) {
    static const TaskKind kinds[] = {TaskKind::math_answer, TaskKind::multichoice, TaskKind::itinerary, TaskKind::code,
                                     TaskKind::logic_puzzle};
    std::vector<CandidatePool> out;
    for (int i = 0; i < n; ++i) {
        CandidatePool pool;
        auto& p = pool.problem;
        p.id = "p" + std::to_string(i) + "-" + std::to_string(rng.below(1000));
        p.task_kind = kinds[rng.index(5)];
        p.statement = random_text(rng);
        if (rng.bernoulli(0.5)) p.gold = static_cast<double>(rng.below(100));
        if (p.task_kind == TaskKind::itinerary) p.budget = static_cast<double>(rng.below(5000));
        if (rng.bernoulli(0.5)) p.preferences = {"museum", "vegetarian"};
        if (rng.bernoulli(0.3)) p.difficulty = "hard";
        pool.shuffle_seed = static_cast<std::int64_t>(rng.below(100));
        const std::size_t nc = 1 + rng.index(6);
        for (std::size_t k = 0; k < nc; ++k) {
            Candidate c;
            c.id = p.id + "/" + std::to_string(k);
            c.problem_id = p.id;
            c.generator_id = "gen" + std::to_string(rng.below(3));
            c.body = random_text(rng, 20);
            c.greedy = k == 0;
            if (p.task_kind == TaskKind::itinerary) {
                if (rng.bernoulli(0.8)) c.violation = rng.uniform();
            } else if (rng.bernoulli(0.8)) {
                c.correctness = rng.bernoulli(0.5) ? Correctness::correct : Correctness::incorrect;
            }
            if (p.task_kind == TaskKind::code && rng.bernoulli(0.5)) c.execution_verdict = Verdict::timeout;
            pool.candidates.push_back(std::move(c));
        }
        out.push_back(std::move(pool));
    }
    return out;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ebr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline Candidate make_candidate(const std::string& pid, const std::string& id, const std::string& body,
                                std::optional<bool> correct = std::nullopt, std::string generator = "g0") {
    Candidate c;
    c.id = id;
    c.problem_id = pid;
    c.body = body;
    c.generator_id = std::move(generator);
    if (correct) c.correctness = *correct ? Correctness::correct : Correctness::incorrect;
    return c;
}

} // namespace testing
