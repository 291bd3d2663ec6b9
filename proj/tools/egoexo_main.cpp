#include <iostream>
#include <string>
#include <vector>

#include "egoexo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return egoexo::run_cli(args, std::cout, std::cerr);
}
