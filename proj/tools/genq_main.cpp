#include <iostream>

#include "genq/cli.hpp"

int main(int argc, char** argv) {
  return genq::run_command({argv + 1, argv + argc}, std::cout, std::cerr);
}
