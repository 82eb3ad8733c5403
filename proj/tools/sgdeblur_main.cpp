#include <malloc.h>

#include <iostream>
#include <string>
#include <vector>

#include "sgdeblur/cli.hpp"

int main(int argc, char** argv) {
  // Training churns through many same-sized buffers; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  std::vector<std::string> args(argv + 1, argv + argc);
  return sgdeblur::run_cli(args, std::cout, std::cerr);
}
