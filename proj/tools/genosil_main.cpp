#include <iostream>

#include "genosil/cli.hpp"

int main(int argc, char** argv) { return genosil::run_cli(argc, argv, std::cout, std::cerr); }
