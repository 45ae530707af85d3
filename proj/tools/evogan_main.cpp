#include <string>
#include <vector>

#include "evogan/cli.hpp"

int main(int argc, char **argv) {
  return evogan::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
