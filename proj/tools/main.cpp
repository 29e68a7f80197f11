#include <iostream>

#include "qvote/gateway.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qvote::gateway::run_cli(args, std::cout, std::cerr);
}
