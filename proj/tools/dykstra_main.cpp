#include <string>
#include <vector>

#include "bap/instance_io.hpp"

int main(int argc, char** argv) {
  return bap::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
