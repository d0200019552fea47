#include <iostream>

#include "perfctl/cli.hpp"

int main(int argc, char** argv) { return perfctl::cli_main(argc, argv, std::cout, std::cerr); }
