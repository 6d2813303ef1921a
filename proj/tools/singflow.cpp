#include "singflow/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return singflow::cli::run(argc, argv, std::cout, std::cerr); }
