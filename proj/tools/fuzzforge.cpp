#include <string>
#include <vector>

#include "fuzzforge/cli.hpp"

int main(int argc, char** argv) {
  return fuzzforge::cli::run(std::vector<std::string>(argv, argv + argc));
}
