#include <string>
#include <vector>

#include "sentcx/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return sentcx::cli::run(args);
}
