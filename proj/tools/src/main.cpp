#include <iostream>
#include <string>
#include <vector>

#include "fedsaf_cli/commands.hpp"

int main(int argc, char** argv) {
  return fedsaf::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
