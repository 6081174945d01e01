#include <iostream>

#include "vlp/cli.hpp"

int main(int argc, char** argv) { return vlp::run_cli(argc, argv, std::cout, std::cerr); }
