#include <iostream>

#include "godsbox/cli.hpp"

int main(int argc, char** argv) {
  return godsbox::cli::run_cli(argc, argv, std::cout, std::cerr);
}
