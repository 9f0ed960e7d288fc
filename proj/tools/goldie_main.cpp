#include <iostream>

#include "goldie/cli.hpp"

int main(int argc, char** argv) {
  return goldie::cli::run(argc, argv, std::cout, std::cerr);
}
