#include "jnd/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return jnd::cli::run(args, std::cout, std::cerr);
}
