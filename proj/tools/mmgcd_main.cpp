#include <string>
#include <vector>

#include "mmgcd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mmgcd::cli::run(args);
}
