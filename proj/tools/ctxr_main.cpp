#include <iostream>
#include <string>
#include <vector>

#include "ctxr/cli.hpp"

int main(int argc, char** argv) {
  return ctxr::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
