#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace prhea {

inline int run_cli(std::vector<std::string> args) {
  (void)args;
  std::cerr << "not implemented yet\n";
  return 1;
}

}  // namespace prhea
