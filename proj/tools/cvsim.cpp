#include <iostream>

#include "cvsim/cli.hpp"

int main(int argc, char** argv) { return cvsim::run_cli(argc, argv, std::cout, std::cerr); }
