#include <iostream>

#include "spiked/cli.hpp"

int main(int argc, char** argv) { return spiked::run_cli(argc, argv, std::cout, std::cerr); }
