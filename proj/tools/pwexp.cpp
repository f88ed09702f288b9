#include <iostream>

#include "pwexp_cli.hpp"

int main(int argc, char** argv) {
  return pwexp::cli::run(argc, argv, {std::cin, std::cout, std::cerr});
}
