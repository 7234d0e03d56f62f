#include <iostream>

#include "covbound/cli/commands.hpp"

int main(int argc, char** argv) { return covbound::cli::run(argc, argv, std::cout, std::cerr); }
