#include <iostream>
#include <string>
#include <vector>

#include "dbdn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dbdn::run_cli(args, std::cout, std::cerr);
}
