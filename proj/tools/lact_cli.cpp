#include <string>
#include <vector>

#include "lact/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lact::cli::run(args);
}
