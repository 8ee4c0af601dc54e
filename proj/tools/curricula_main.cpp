#include "cli.hpp"

int main(int argc, char** argv) {
    return curricula::cli::run(argc, argv);
}
