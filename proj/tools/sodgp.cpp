#include <iostream>

#include "sodgp/cli.hpp"

int main(int argc, char** argv) { return sodgp::run_cli(argc, argv, std::cout, std::cerr); }
