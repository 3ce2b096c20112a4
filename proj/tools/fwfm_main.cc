#include <iostream>
#include <string>
#include <vector>

#include "fwfm/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fwfm::cli::run(args, std::cout, std::cerr);
}
