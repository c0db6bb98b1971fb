// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            all ten
//   acceptance 1 2 9      selected criteria
// Exit status is the number of failed criteria (capped at 100).

#include "euvwg/validation.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace euvwg;
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
    if (ids.empty()) ids = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int failed = 0;
    for (int id : ids) {
        GateResult g;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            g = run_gate(id, [](const std::string& s) { std::cout << "  " << s << std::endl; });
        } catch (const std::exception& e) {
            g = {id, "criterion-" + std::to_string(id), false, std::string("exception: ") + e.what(), {}};
        }
        std::cout << gate_line(g) << " (" << std::fixed << std::setprecision(1) << seconds_since(t0) << " s)" << std::endl;
        std::cout.unsetf(std::ios::fixed);
        if (!g.pass) ++failed;
    }
    return std::min(failed, 100);
}
