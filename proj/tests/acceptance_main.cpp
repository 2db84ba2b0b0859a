#include <iostream>
#include <string>
#include <vector>

#include "l1bsde/acceptance.hpp"

// Usage: acceptance [core|mc|all] [criterion keys or numbers...]
int main(int argc, char** argv) {
    const std::string suite = argc > 1 ? argv[1] : "all";
    l1bsde::AcceptanceOptions opt;
    for (int i = 2; i < argc; ++i) {
        opt.only.emplace_back(argv[i]);
    }
    opt.on_result = [](const l1bsde::CriterionResult& r) { std::cout << l1bsde::format_result(r) << std::endl; };
    try {
        const auto s = l1bsde::verify_suite(suite, opt);
        std::cout << "\n" << s.passed() << "/" << s.results.size() << " acceptance criteria passed\n";
        for (const auto& r : s.results) {
            if (!r.passed) {
                std::cout << "failing: " << r.number << " " << r.key << "\n";
            }
        }
        return s.all_passed() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
