#include <iostream>

#include "flock/cli.hpp"

int main(int argc, char** argv) { return flock::cli::run_cli(argc, argv, std::cout, std::cerr); }
