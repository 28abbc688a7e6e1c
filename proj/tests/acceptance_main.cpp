// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <cstdio>
#include <cstring>
#include <string>
#include <thread>

#include <lbal/verify/acceptance.hpp>

int main(int argc, char** argv) {
    lbal::verify::AcceptanceOptions opt;
    opt.threads = std::max(1u, std::thread::hardware_concurrency());
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0) opt.quick = true;
        else opt.only.insert(argv[i]);
    }
    const auto results = lbal::verify::run_acceptance(opt);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
    return failed == 0 ? 0 : 1;
}
