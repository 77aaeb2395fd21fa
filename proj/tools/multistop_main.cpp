#include "multistop/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return multistop::cli::main(argc, argv, std::cout, std::cerr); }
