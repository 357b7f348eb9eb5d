#include <iostream>
#include <string>
#include <vector>

#include "stormlog/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return stormlog::cli::run(args, std::cout, std::cerr);
}
