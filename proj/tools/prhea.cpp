#include "prhea/cli.hpp"

int main(int argc, char** argv) {
  return prhea::run_cli(std::vector<std::string>(argv, argv + argc));
}
