#include <iostream>

#include "cavion/cli.hpp"

int main(int argc, char** argv) { return cavion::run_cli(argc, argv, std::cout, std::cerr); }
