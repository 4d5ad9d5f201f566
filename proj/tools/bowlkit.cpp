#include <iostream>

#include "bowl/cli.hpp"

int main(int argc, char** argv) { return bowl::run_cli(argc, argv, std::cout, std::cerr); }
