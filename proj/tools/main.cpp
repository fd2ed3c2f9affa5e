#include <iostream>

#include "medpipe/cli.hpp"

int main(int argc, char** argv) { return medpipe::run_cli(argc, argv, std::cout, std::cerr); }
