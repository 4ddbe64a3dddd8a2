#include <iostream>
#include <string>
#include <vector>

#include "pathhjb/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return pathhjb::run_cli(args, std::cout, std::cerr);
}
