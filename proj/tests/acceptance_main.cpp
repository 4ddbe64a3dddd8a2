#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#include "pathhjb/acceptance.hpp"

// Usage: pathhjb_acceptance [criterion ...]
int main(int argc, char** argv) {
    pathhjb::AcceptanceOptions opts;
    for (int i = 1; i < argc; ++i) {
        opts.only.push_back(std::atoi(argv[i]));
    }
    opts.on_result = [](const pathhjb::CriterionResult& r) {
        std::cout << pathhjb::format_result_line(r) << " [" << std::fixed << std::setprecision(1) << r.seconds
                  << " s]" << std::endl;
    };
    const auto results = pathhjb::run_acceptance(opts);
    int failed = 0;
    for (const auto& r : results) {
        failed += r.pass ? 0 : 1;
    }
    std::cout << (results.size() - failed) << "/" << results.size() << " acceptance criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
