#include <iostream>
#include <string>
#include <vector>

#include "splitdist/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return splitdist::run_cli(args, std::cout, std::cerr);
}
