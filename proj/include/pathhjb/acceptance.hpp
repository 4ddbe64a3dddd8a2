#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pathhjb {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    unsigned workers = 1;
    // Run only these criteria (all when empty).
    std::vector<int> only;
    // Called after each criterion finishes.
    std::function<void(const CriterionResult&)> on_result;
};

inline constexpr int kCriteriaCount = 15;

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});
CriterionResult run_criterion(int id, unsigned workers = 1);

// "[PASS] criterion 3 (name): detail"
std::string format_result_line(const CriterionResult& r);
// Header "criterion,name,pass,detail", one row per result; no timings so the
// table is reproducible byte for byte.
std::string acceptance_csv(const std::vector<CriterionResult>& results);

}  // namespace pathhjb
