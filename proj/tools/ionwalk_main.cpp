#include <iostream>

#include "ionwalk/runner.hpp"

int main(int argc, char** argv) { return ionwalk::run_cli(argc, argv, std::cout, std::cerr); }
