#include <iostream>

#include "memqa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return memqa::Run(args, std::cout, std::cerr);
}
