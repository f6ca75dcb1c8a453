// Acceptance runner: one PASS/FAIL line per criterion, followed by the
// individual checks. Exit status is 0 only when every criterion passes.
//
//   hhmap_acceptance [criterion ids...]
//
// Records are also written as JSON lines to $HH_OUTPUT_DIR/acceptance.jsonl
// when that variable is set.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "hhmap/verify.hpp"

using namespace hhmap;

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    VerifyOptions opt;
    opt.threads = std::max(1u, std::thread::hardware_concurrency());

    std::ofstream jsonl;
    if (const char* dir = std::getenv("HH_OUTPUT_DIR")) jsonl.open(std::string(dir) + "/acceptance.jsonl");

    int failed = 0, ran = 0;
    for (const auto& spec : acceptance_criteria()) {
        if (!only.empty() && std::find(only.begin(), only.end(), spec.id) == only.end()) continue;
        const CriterionResult r = run_criterion(spec, opt);
        ++ran;
        failed += !r.pass();
        std::printf("%s criterion %d: %s (%.1f s)\n", r.pass() ? "PASS" : "FAIL", r.id, r.title.c_str(), r.seconds);
        if (!r.error.empty()) std::printf("    error: %s\n", r.error.c_str());
        for (const auto& c : r.record.checks)
            std::printf("    [%s] %s: value %.6g, bound %.6g\n", c.pass ? "ok" : "FAILED", c.name.c_str(), c.value, c.bound);
        for (const auto& n : r.notes) std::printf("    note: %s\n", n.c_str());
        std::fflush(stdout);
        if (jsonl) write_jsonl(jsonl, r.record);
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed ? 1 : 0;
}
