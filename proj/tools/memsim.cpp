#include "memsim/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return memsim::cli::run(argc, argv, std::cout, std::cerr);
}
