#include <iostream>

#include "mtcrf/cli.hpp"

int main(int argc, char** argv) { return mtcrf::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr); }
