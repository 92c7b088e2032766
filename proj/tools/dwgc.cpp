#include <iostream>
#include <string>
#include <vector>

#include "dwgc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dwgc::cli::run(args, std::cout, std::cerr);
}
