#include <iostream>

#include "sc/cli.hpp"

int main(int argc, char** argv) {
  return sc::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
