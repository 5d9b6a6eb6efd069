#include <cstdlib>
#include <iostream>
#include <string>

#include "dime_scope/cli.hpp"
#include "dime_scope/kernels.hpp"

int main(int argc, char** argv) {
  if (const char* env = std::getenv("DIME_SCOPE_THREADS"); env != nullptr && *env != '\0') {
    std::size_t used = 0;
    int threads = -1;
    try {
      threads = std::stoi(env, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || env[used] != '\0' || threads < 1) {
      std::cerr << "error: DIME_SCOPE_THREADS must be a positive integer, got '" << env << "'\n";
      return 1;
    }
    dime::kernels::set_thread_limit(threads);
  }
  return dime::run_cli(argc, argv, std::cout, std::cerr);
}
