#include <iostream>

#include "voiceloop/cli.hpp"

int main(int argc, char** argv) {
  return voiceloop::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
