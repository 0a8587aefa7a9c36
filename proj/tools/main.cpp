#include <iostream>

#include "commands.hpp"

int main(int argc, char **argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return mfi::cli::run(args, std::cout, std::cerr);
}
