#include <iostream>

#include "orliczfb/cli.hpp"

int main(int argc, char** argv) { return orliczfb::cli::run(argc, argv, std::cout, std::cerr); }
