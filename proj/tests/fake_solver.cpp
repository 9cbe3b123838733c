// Scripted stand-in for an SMT solver, driven by environment variables:
//   FAKE_MODE    sat | unsat | unknown | garbage | sleep   (default unsat)
//   FAKE_VAL     integer assigned to every declared Int const in sat mode
//   FAKE_CAPTURE path to copy stdin into, for protocol assertions
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

int main() {
    std::ostringstream all;
    all << std::cin.rdbuf();
    std::string input = all.str();

    if (const char* cap = std::getenv("FAKE_CAPTURE")) {
        std::ofstream f(cap);
        f << input;
    }
    std::string mode = std::getenv("FAKE_MODE") ? std::getenv("FAKE_MODE") : "unsat";
    if (mode == "sleep") {
        std::this_thread::sleep_for(std::chrono::seconds(30));
        std::cout << "unknown\n";
        return 0;
    }
    if (mode == "garbage") {
        std::cout << "lorem ipsum (((\n";
        return 0;
    }
    if (mode == "unknown") {
        std::cout << "unknown\n";
        return 0;
    }
    if (mode == "unsat") {
        std::cout << "unsat\n";
        return 0;
    }
    std::string val = std::getenv("FAKE_VAL") ? std::getenv("FAKE_VAL") : "0";
    std::cout << "sat\n(\n";
    std::istringstream lines(input);
    std::string line;
    while (std::getline(lines, line)) {
        auto p = line.find("(declare-const ");
        if (p == std::string::npos) continue;
        std::istringstream ls(line.substr(p + 15));
        std::string name, sort;
        ls >> name >> sort;
        if (!sort.empty() && sort.back() == ')') sort.pop_back();
        if (sort == "Bool") {
            std::cout << "  (define-fun " << name << " () Bool false)\n";
        } else {
            std::string v = val;
            if (!v.empty() && v[0] == '-')
                std::cout << "  (define-fun " << name << " () Int (- " << v.substr(1) << "))\n";
            else
                std::cout << "  (define-fun " << name << " () Int " << v << ")\n";
        }
    }
    std::cout << ")\n";
    return 0;
}
