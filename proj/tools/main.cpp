#include <iostream>

#include "cdslab/cli.hpp"

int main(int argc, char** argv) { return cdslab::run_cli(argc, argv, std::cout, std::cerr); }
