#include "ppap/cli/cli.h"

#include <iostream>

int main(int argc, char ** argv) { return ppap::cli::run(argc, argv, std::cout, std::cerr); }
