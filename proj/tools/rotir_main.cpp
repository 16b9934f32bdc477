#include <string>
#include <vector>

#include "rotir/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rotir::cli::run(args);
}
