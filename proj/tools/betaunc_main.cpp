#include <iostream>
#include <string>
#include <vector>

#include "betaunc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return betaunc::run_cli(args, std::cout, std::cerr);
}
