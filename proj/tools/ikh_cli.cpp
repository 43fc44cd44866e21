#include <iostream>

#include "ikh/cli.hpp"
#include "ikh/net.hpp"

int main(int argc, char** argv) {
  ikh::net::keep_heap_resident();
  return ikh::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
