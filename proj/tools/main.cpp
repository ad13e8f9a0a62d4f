#include <vector>

#include "mabsa/harness.hpp"

int main(int argc, char** argv) {
  return mabsa::run_cli(std::vector<std::string>(argv, argv + argc));
}
