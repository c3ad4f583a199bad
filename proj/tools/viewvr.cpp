#include <cstdlib>
#include <iostream>

#include "viewvr/teleopd/cli.hpp"

int main(int argc, char** argv) {
    return viewvr::teleopd::cli_run(argc, argv, std::cout, std::cerr, [](const char* k) { return std::getenv(k); });
}
