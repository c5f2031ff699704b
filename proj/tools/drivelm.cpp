#include <iostream>

#include "drivelm/cli.hpp"

int main(int argc, char** argv) {
  return drivelm::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
