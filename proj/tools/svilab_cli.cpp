#include <iostream>

#include "svilab/cli.hpp"

int main(int argc, char** argv) { return svilab::run_cli(argc, argv, std::cout, std::cerr); }
