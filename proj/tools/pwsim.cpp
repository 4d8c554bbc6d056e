#include "pws/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pws::run_cli(argc, argv, std::cout, std::cerr); }
