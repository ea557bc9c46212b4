#include <iostream>

#include "canids/pipeline.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return canids::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
