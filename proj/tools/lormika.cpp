#include <iostream>

#include "lormika/cli.hpp"

int main(int argc, char** argv) { return lormika::run_cli(argc, argv, std::cout, std::cerr); }
