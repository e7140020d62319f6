#include <string>
#include <vector>

#include "neurodecode/cli.hpp"

int main(int argc, char** argv) {
  return neurodecode::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
